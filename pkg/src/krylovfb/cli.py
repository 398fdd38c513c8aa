"""Command-line interface: ``krylovfb <subcommand> ...``.

Exit status is 0 on success, 1 when a verification fails and 2 on usage or
parse errors. Results go to ``--out`` as JSON; a summary table is printed.
"""

import argparse
import logging
import sys as _sys

import numpy as np

from . import io
from .driver import AlgorithmOneConfig, ShiftConfig, algorithm_one, stabilize_by_output_feedback
from .exceptions import KrylovFBError, ParseError, VerificationError
from .experiments import (
    InstanceSpec,
    certificate,
    gen_instance,
    gen_stabilization_instance,
    gen_unreachable_target,
    run_experiment_one,
    run_experiment_two,
    run_unreachable_experiment,
)
from .feedback import FeedbackSystem, bkc_reachability_check, rank_one_update, verify_feedback
from .numerics import Tolerance, poly_roots

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2
MODES = {"columns": "columns_of_B", "random": "random_combinations"}


def _tol(args):
    return Tolerance(rank_tol=args.tol_rank, residual_tol=args.tol_res)


def _emit(args, kind, payload, lines):
    if args.out:
        text = io.report_to_str(payload) if kind == "report" else io.dumps(kind, payload)
        io.write(args.out, text)
        lines = list(lines) + [f"written: {args.out}"]
    print("\n".join(lines))


def _load_system(path):
    return io.system_from_str(io.read(path))


def _target(extras, args, n):
    if getattr(args, "target", None):
        return io.poly_from_str(io.read(args.target))
    if "b" not in extras:
        raise ParseError("system file has no target 'b'; pass --target", field="b")
    b = np.asarray(extras["b"], dtype=float)
    if b.shape != (n + 1,):
        raise ParseError(f"target must have {n + 1} coefficients", field="b")
    return b


def _vec(x):
    return " ".join(f"{v:.6g}" for v in np.ravel(x))


# subcommands ------------------------------------------------------------------


def cmd_gen(args):
    spec = InstanceSpec(n=args.n, m=args.m, p=args.p, seed=args.seed)
    gen = {"planted": gen_instance, "unreachable": gen_unreachable_target,
           "stabilize": gen_stabilization_instance}[args.kind]
    inst = gen(spec)
    text = io.system_to_str(inst.system, b=inst.b, d=inst.d, planted_K=inst.planted_K,
                            seed=args.seed, generator=args.kind)
    lines = [f"generated {args.kind} instance n={spec.n} m={spec.m} p={spec.p} seed={args.seed}",
             f"target b: {_vec(inst.b)}"]
    if args.out:
        io.write(args.out, text)
        lines.append(f"written: {args.out}")
    else:
        lines.append(text)
    print("\n".join(lines))
    return EXIT_OK


def cmd_solve_rank1(args):
    sys, extras = _load_system(args.system)
    b = _target(extras, args, sys.n)
    if args.mu is None:
        mu = np.random.default_rng(args.seed).uniform(-1.0, 1.0, sys.m)
        mu /= np.linalg.norm(mu)
    else:
        mu = np.asarray(args.mu, dtype=float)
    res = rank_one_update(sys, mu, b, _tol(args), verify=False)
    cert = certificate(sys, res.K, res.d_new, rng=args.seed)
    payload = dict(K=res.K, rho=res.rho, sigma=res.sigma, d=res.d, d_new=res.d_new, mu=res.mu,
                   residual=res.residual, relative_residual=res.relative_residual,
                   verdict=res.verdict, certificate=cert)
    _emit(args, "result", payload, [
        f"residual ||b - d_new||: {res.residual:.6e}",
        f"relative to ||b - d||:  {res.relative_residual:.6e}",
        f"verdict: {res.verdict}",
        f"verification error: {cert['error']:.3e} ({'pass' if cert['passed'] else 'FAIL'})",
    ])
    return EXIT_OK if cert["passed"] else EXIT_VERIFY


def cmd_algorithm1(args):
    sys, extras = _load_system(args.system)
    b = _target(extras, args, sys.n)
    cfg = AlgorithmOneConfig(epsilon=args.eps, max_iters=args.iters, mode=MODES[args.mode],
                             seed=args.seed, combinations_per_iter=args.combos, verify=False,
                             tol=_tol(args))
    d0 = extras.get("d") if isinstance(extras.get("d"), np.ndarray) else None
    out = algorithm_one(sys, b, cfg, d0=d0)
    cert = certificate(sys, out.K_final, out.d_final, rng=args.seed)
    rel = float(np.linalg.norm(b - out.d_final) / np.linalg.norm(b))
    payload = dict(success=out.success, iterations=out.iterations_used, stalled=out.stalled,
                   relative_distance=rel, K=out.K_final, d_final=out.d_final,
                   history=[list(h) for h in out.history], certificate=cert)
    _emit(args, "result", payload, [
        f"{'iteration':>10} {'||b - d||':>14}",
        *(f"{i:>10} {dist:>14.6e}" for i, dist, _ in _thin(out.history)),
        f"success: {out.success}  iterations: {out.iterations_used}  stalled: {out.stalled}",
        f"relative distance: {rel:.6e}",
        f"verification error: {cert['error']:.3e} ({'pass' if cert['passed'] else 'FAIL'})",
    ])
    return EXIT_OK if cert["passed"] else EXIT_VERIFY


def _thin(history, rows=12):
    step = max(1, len(history) // rows)
    picked = history[::step]
    if picked[-1] is not history[-1]:
        picked.append(history[-1])
    return picked


def cmd_check_reach(args):
    sys, _ = _load_system(args.system)
    A_hat = io.matrix_from_str(io.read(args.a_hat))
    v = bkc_reachability_check(sys.A, A_hat, sys.B, sys.C, _tol(args))
    payload = dict(reachable=v.reachable, column_condition=v.column_condition,
                   kernel_condition=v.kernel_condition, max_violation=v.max_violation,
                   threshold=v.threshold, K=v.K)
    _emit(args, "result", payload, [
        f"columns in col(B):  {v.column_condition}",
        f"vanishes on ker(C): {v.kernel_condition}",
        f"max violation: {v.max_violation:.3e} (threshold {v.threshold:.3e})",
        f"factorizable as B K C: {v.reachable}",
    ])
    return EXIT_OK


def cmd_stabilize(args):
    sys, extras = _load_system(args.system)
    cfg = ShiftConfig(max_total_iters=args.iters, verify=False, tol=_tol(args))
    d0 = extras.get("d") if isinstance(extras.get("d"), np.ndarray) else None
    out = stabilize_by_output_feedback(sys, cfg, seed=args.seed, d0=d0)
    cert = certificate(sys, out.K_final, out.d_final, rng=args.seed)
    roots = poly_roots(out.d_final)
    payload = dict(success=out.success, iterations=out.iterations_used, K=out.K_final,
                   d_final=out.d_final, history=out.history,
                   trajectory=[[[float(z.real), float(z.imag)] for z in r] for r in out.trajectory],
                   certificate=cert)
    _emit(args, "result", payload, [
        f"{'step':>5} {'status':>9} {'rightmost':>12} {'#rhp':>5}",
        *(f"{h['iteration']:>5} {h['status']:>9} {h['rightmost']:>12.4e} {h['n_rhp']:>5}"
          for h in out.history),
        f"success: {out.success}  iterations: {out.iterations_used}",
        f"rightmost root real part: {roots.real.max():.6e}",
        f"verification error: {cert['error']:.3e} ({'pass' if cert['passed'] else 'FAIL'})",
    ])
    return EXIT_OK if cert["passed"] else EXIT_VERIFY


def _spec(args):
    return InstanceSpec(n=args.n, m=args.m, p=args.p)


def _report_exit(args, report):
    _emit(args, "report", report, [report.table()])
    failed = report.summary.get("failed reps", 0)
    passed = report.summary.get("certificates passed", 0)
    return EXIT_OK if passed == len(report.records) - failed else EXIT_VERIFY


def cmd_exp1(args):
    iters = args.iters or [1000, 1500]
    report = run_experiment_one(reps=args.reps, iters=iters, spec=_spec(args), seed=args.seed,
                                combinations_per_iter=args.combos, workers=args.workers,
                                timings=args.timings)
    return _report_exit(args, report)


def cmd_exp1_unreach(args):
    iters = args.iters[0] if args.iters else 1000
    report = run_unreachable_experiment(reps=args.reps, iters=iters, spec=_spec(args), seed=args.seed,
                                        combinations_per_iter=args.combos, workers=args.workers,
                                        timings=args.timings)
    return _report_exit(args, report)


def cmd_exp2(args):
    iters = args.iters[0] if args.iters else 200
    report = run_experiment_two(instances=args.reps, spec=_spec(args), seed=args.seed,
                                shift=ShiftConfig(max_total_iters=iters), workers=args.workers,
                                timings=args.timings)
    return _report_exit(args, report)


def _certificates(node):
    if isinstance(node, dict):
        if {"A", "B", "C", "K", "claimed"} <= node.keys():
            yield node
        else:
            for v in node.values():
                yield from _certificates(v)
    elif isinstance(node, list):
        for v in node:
            yield from _certificates(v)


def cmd_verify(args):
    doc = io.document_from_str(io.read(args.file))
    certs = list(_certificates(doc))
    if not certs:
        raise ParseError("no certificates found", field="certificate")
    lines, ok_all = [], True
    for i, c in enumerate(certs):
        try:
            sys = FeedbackSystem(np.array(c["A"], float), np.array(c["B"], float),
                                 np.array(c["C"], float), validate=False)
            ok, _, err = verify_feedback(sys, np.array(c["K"], float), np.array(c["claimed"], float),
                                         rng=args.seed, rtol=args.rtol)
        except KrylovFBError as exc:
            ok, err = False, float("nan")
            lines.append(f"certificate {i}: {exc}")
        ok_all &= ok
        lines.append(f"certificate {i:>3}: error {err:.3e}  {'pass' if ok else 'FAIL'}")
    lines.append(f"{sum(1 for _ in certs)} certificates, {'all pass' if ok_all else 'FAILURES'}")
    print("\n".join(lines))
    return EXIT_OK if ok_all else EXIT_VERIFY


# parser -----------------------------------------------------------------------


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write JSON output here")
    common.add_argument("--tol-rank", type=float, default=None, help="relative rank threshold")
    common.add_argument("--tol-res", type=float, default=1e-9, help="absolute residual threshold")
    return common


def _dims(n=20, m=3, p=3):
    dims = argparse.ArgumentParser(add_help=False)
    dims.add_argument("--n", type=int, default=n)
    dims.add_argument("--m", type=int, default=m)
    dims.add_argument("--p", type=int, default=p)
    return dims


def _exp(reps=50):
    exp = argparse.ArgumentParser(add_help=False)
    exp.add_argument("--reps", type=int, default=reps, help="repetitions (instances for exp2)")
    exp.add_argument("--iters", type=int, nargs="+")
    exp.add_argument("--combos", type=int, default=None, help="random combinations per iteration")
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--timings", action="store_true", help="record wall-clock time in the report")
    return exp


def build_parser():
    p = argparse.ArgumentParser(prog="krylovfb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[_common(), _dims()], help="generate a random instance")
    g.add_argument("--kind", choices=["planted", "unreachable", "stabilize"], default="planted")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("solve-rank1", parents=[_common()], help="one least-squares rank-one update")
    r.add_argument("system")
    r.add_argument("--target", help="polynomial file (default: the system file's 'b')")
    r.add_argument("--mu", type=float, nargs="+", help="input combination (default: seeded random unit vector)")
    r.set_defaults(func=cmd_solve_rank1)

    a = sub.add_parser("algorithm1", parents=[_common()], help="iterated rank-one updates")
    a.add_argument("system")
    a.add_argument("--target")
    a.add_argument("--iters", type=int, default=1000)
    a.add_argument("--eps", type=float, default=1e-10)
    a.add_argument("--mode", choices=sorted(MODES), default="columns")
    a.add_argument("--combos", type=int, default=None)
    a.set_defaults(func=cmd_algorithm1)

    c = sub.add_parser("check-reach", parents=[_common()], help="test A_hat = A + B K C")
    c.add_argument("system")
    c.add_argument("--a-hat", required=True, help="matrix file")
    c.set_defaults(func=cmd_check_reach)

    s = sub.add_parser("stabilize", parents=[_common()], help="shift roots into the left half-plane")
    s.add_argument("system")
    s.add_argument("--iters", type=int, default=200)
    s.set_defaults(func=cmd_stabilize)

    e1 = sub.add_parser("exp1", parents=[_common(), _dims(), _exp()], help="planted-target experiment")
    e1.set_defaults(func=cmd_exp1)
    eu = sub.add_parser("exp1-unreach", parents=[_common(), _dims(), _exp()], help="unreachable-target experiment")
    eu.set_defaults(func=cmd_exp1_unreach)
    e2 = sub.add_parser("exp2", parents=[_common(), _dims(10, 2, 3), _exp(10)], help="stabilization experiment")
    e2.set_defaults(func=cmd_exp2)

    v = sub.add_parser("verify", help="re-check every certificate in a result or report file")
    v.add_argument("file")
    v.add_argument("--seed", type=int, default=12345)
    v.add_argument("--rtol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=_sys.stderr)
        return EXIT_VERIFY
    except (KrylovFBError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    _sys.exit(main())
