"""Randomized instance generators and the reproducible experiment runners."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .driver import AlgorithmOneConfig, ShiftConfig, algorithm_one, stabilize_by_output_feedback
from .exceptions import DomainError, GenerationError, KrylovFBError
from .feedback import FeedbackSystem, verify_feedback
from .numerics import charpoly_eig, companion_matrix, poly_from_roots, poly_roots

log = logging.getLogger(__name__)

#: decade bin edges 1e-15, 1e-14, ..., 1e-7
BIN_EDGES = tuple(10.0**k for k in range(-15, -6))
MAX_RETRIES = 20


@dataclass(frozen=True)
class InstanceSpec:
    n: int = 20
    m: int = 3
    p: int = 3
    coeff_range: int = 2
    bc_entry_range: int = 10
    k_entry_range: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or not 1 <= self.p <= self.n:
            raise DomainError("need n >= 1, m >= 1 and 1 <= p <= n")
        if self.coeff_range < 0 or self.bc_entry_range < 1 or not self.k_entry_range >= 0:
            raise DomainError("entry ranges must be nonnegative (B, C range >= 1)")


@dataclass
class Instance:
    system: FeedbackSystem
    d: np.ndarray
    b: np.ndarray
    planted_K: np.ndarray | None = None
    attempts: int = 1


def _random_integer_poly(rng, spec):
    d = np.empty(spec.n + 1)
    d[0] = 1.0
    d[1:-1] = rng.integers(-spec.coeff_range, spec.coeff_range, size=spec.n - 1, endpoint=True)
    d[-1] = rng.choice([-1.0, 1.0])
    return d


def _random_system(rng, spec, A):
    r = spec.bc_entry_range
    for attempt in range(1, MAX_RETRIES + 1):
        B = rng.integers(-r, r, size=(spec.n, spec.m), endpoint=True).astype(float)
        C = rng.integers(-r, r, size=(spec.p, spec.n), endpoint=True).astype(float)
        try:
            return FeedbackSystem(A, B, C), attempt
        except DomainError:
            continue
    raise GenerationError(f"no valid (B, C) after {MAX_RETRIES} attempts")


def gen_instance(spec):
    """Planted instance: companion ``A``, integer ``B, C``, small random ``K``.

    The target is the characteristic polynomial of ``A + B K C``, computed
    from eigenvalues so it does not share a code path with the solvers.
    """
    rng = np.random.default_rng(spec.seed)
    d = _random_integer_poly(rng, spec)
    sys, attempts = _random_system(rng, spec, companion_matrix(d))
    K = rng.uniform(-spec.k_entry_range, spec.k_entry_range, (spec.m, spec.p))
    b = charpoly_eig(sys.closed_loop(K))
    return Instance(system=sys, d=d, b=b, planted_K=K, attempts=attempts)


def gen_unreachable_target(spec, eps_range=0.01):
    """Companion instance whose target is ``d`` plus a small random perturbation.

    The leading and constant coefficients are left unchanged.
    """
    rng = np.random.default_rng(spec.seed)
    d = _random_integer_poly(rng, spec)
    sys, attempts = _random_system(rng, spec, companion_matrix(d))
    eps = rng.uniform(-eps_range, eps_range, spec.n + 1)
    eps[0] = eps[-1] = 0.0
    return Instance(system=sys, d=d, b=d + eps, attempts=attempts)


def _hurwitz_poly(rng, n):
    pairs = n // 4
    re = -rng.uniform(0.1, 1.0, pairs)
    im = rng.uniform(0.2, 2.0, pairs)
    z = re + 1j * im
    real = -rng.uniform(0.1, 1.0, n - 2 * pairs)
    roots = np.concatenate([real, z, np.conj(z)])
    return roots, poly_from_roots(roots)


def gen_stabilization_instance(spec, push=0.05, max_boot_iters=2000):
    """Destabilized instance built from a Hurwitz companion matrix.

    The rightmost roots of a random stable polynomial are moved to real part
    ``push`` and Algorithm I (random combinations) runs until some root of
    the tracked polynomial crosses into the right half-plane. The resulting
    closed loop becomes the new ``A``. Bounded retries with fresh draws.
    """
    rng = np.random.default_rng(spec.seed)
    for attempt in range(1, MAX_RETRIES + 1):
        roots, dp = _hurwitz_poly(rng, spec.n)
        sys0, _ = _random_system(rng, spec, companion_matrix(dp))
        target_roots = roots.copy()
        right = target_roots.real >= target_roots.real.max() - 1e-12
        target_roots[right] = push + 1j * target_roots[right].imag
        target = poly_from_roots(target_roots)
        cfg = AlgorithmOneConfig(epsilon=1e-14, max_iters=max_boot_iters, mode="random_combinations",
                                 seed=int(rng.integers(2**63)), verify=False)
        try:
            out = algorithm_one(sys0, target, cfg, d0=dp,
                                until=lambda d: poly_roots(d).real.max() > 0)
            if poly_roots(out.d_final).real.max() <= 0:
                continue
            sys = FeedbackSystem(sys0.closed_loop(out.K_final), sys0.B, sys0.C)
        except KrylovFBError:
            continue
        return Instance(system=sys, d=out.d_final, b=target, planted_K=out.K_final, attempts=attempt)
    raise GenerationError(f"bootstrap failed after {MAX_RETRIES} attempts")


# ---------------------------------------------------------------------------
# reports


def histogram(values):
    """Counts over ``[underflow, [1e-15,1e-14), ..., [1e-8,1e-7), overflow]``.

    NaN (failed repetitions) counts as overflow.
    """
    counts = [0] * (len(BIN_EDGES) + 1)
    for v in values:
        if v is None or not np.isfinite(v) or v >= BIN_EDGES[-1]:
            counts[-1] += 1
        else:
            counts[int(np.searchsorted(BIN_EDGES, v, side="right"))] += 1
    labels = ["<1e-15"] + [f"[1e{k},1e{k + 1})" for k in range(-15, -7)] + [">=1e-7"]
    return dict(zip(labels, counts))


@dataclass
class ExperimentReport:
    """Per-repetition records, histograms, summary counts and metadata.

    Records are plain JSON-friendly dicts ordered by repetition index.
    Certificates carry enough to re-check each claim from the file alone.
    """

    name: str
    metadata: dict
    records: list
    histograms: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def table(self):
        lines = [f"== {self.name} =="]
        for k, v in self.metadata.items():
            lines.append(f"  {k}: {v}")
        for title, hist in self.histograms.items():
            lines.append(f"-- {title}")
            lines.extend(f"  {label:>18} {count:4d}" for label, count in hist.items())
        lines.append("-- summary")
        for k, v in self.summary.items():
            lines.append(f"  {k}: {_fmt(v)}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return str(v)


def certificate(sys, K, claimed, rng=None):
    ok, recomputed, err = verify_feedback(sys, K, claimed, rng=rng)
    return dict(
        A=sys.A.tolist(), B=sys.B.tolist(), C=sys.C.tolist(), K=np.asarray(K).tolist(),
        claimed=np.asarray(claimed).tolist(), recomputed=recomputed.tolist(),
        error=err, passed=bool(ok),
    )


def _substreams(seed, count):
    # two independent 63-bit seeds per repetition: instance and solver
    children = np.random.SeedSequence(seed).spawn(count)
    return [tuple(int(x) for x in c.generate_state(2, np.uint64) >> np.uint64(1)) for c in children]


def _run(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _rel(x, y):
    return float(np.linalg.norm(x - y) / np.linalg.norm(y))


def _safe(fn, job):
    try:
        return fn(job)
    except KrylovFBError as exc:
        return dict(rep=job[0], error=f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# experiment one: planted targets


def _exp1_rep(job):
    rep, (inst_seed, run_seed), spec, iters, ncomb = job
    inst = gen_instance(InstanceSpec(**{**asdict(spec), "seed": inst_seed}))
    sys = inst.system
    cfg = AlgorithmOneConfig(epsilon=1e-300, max_iters=max(iters), mode="random_combinations",
                             seed=run_seed, combinations_per_iter=ncomb, max_stagnant=10**9)
    out = algorithm_one(sys, inst.b, cfg, d0=inst.d, snapshot_at=iters)
    a_norm = np.linalg.norm(sys.A)
    planted = sys.closed_loop(inst.planted_K)
    snaps = {}
    for it in iters:
        d_it, K_it = out.snapshots[it]
        snaps[str(it)] = dict(
            relative_distance=_rel(d_it, inst.b),
            k_recovery=float(np.linalg.norm(sys.closed_loop(K_it) - planted) / a_norm),
        )
    return dict(
        rep=rep, instance_seed=inst_seed, solver_seed=run_seed, snapshots=snaps,
        iterations_used=out.iterations_used, stalled=out.stalled,
        certificate=certificate(sys, out.K_final, out.d_final, rng=run_seed + 1),
    )


def run_experiment_one(reps=50, iters=(1000, 1500), spec=InstanceSpec(), seed=0,
                       combinations_per_iter=None, workers=1, timings=False):
    """Algorithm I (random combinations) against planted reachable targets."""
    iters = tuple(sorted(int(i) for i in iters))
    ncomb = combinations_per_iter or spec.m
    t0 = time.perf_counter()
    jobs = [(r, s, spec, iters, ncomb) for r, s in enumerate(_substreams(seed, reps))]
    records = _run(_safe_exp1, jobs, workers)
    hists, summary = {}, {}
    for it in iters:
        rd = [r["snapshots"][str(it)]["relative_distance"] if "snapshots" in r else None for r in records]
        kr = [r["snapshots"][str(it)]["k_recovery"] if "snapshots" in r else None for r in records]
        hists[f"relative distance @ {it}"] = histogram(rd)
        hists[f"K recovery @ {it}"] = histogram(kr)
        summary[f"distance<=1e-7 @ {it}"] = sum(v is not None and v <= 1e-7 for v in rd)
        summary[f"K recovery<=1e-7 @ {it}"] = sum(v is not None and v <= 1e-7 for v in kr)
    summary["certificates passed"] = sum(r.get("certificate", {}).get("passed", False) for r in records)
    summary["failed reps"] = sum("error" in r for r in records)
    meta = dict(seed=seed, reps=reps, iters=list(iters), combinations_per_iter=ncomb,
                mode="random_combinations", spec=asdict(spec))
    if timings:
        meta["seconds"] = time.perf_counter() - t0
    return ExperimentReport("experiment one", meta, records, hists, summary)


def _safe_exp1(job):
    return _safe(_exp1_rep, job)


# ---------------------------------------------------------------------------
# unreachable targets, then re-targeting the reached polynomial


def _unreach_rep(job):
    rep, (inst_seed, run_seed), spec, iters, ncomb, eps_range = job
    inst = gen_unreachable_target(InstanceSpec(**{**asdict(spec), "seed": inst_seed}), eps_range)
    sys = inst.system
    cfg = AlgorithmOneConfig(epsilon=1e-300, max_iters=iters, mode="random_combinations",
                             seed=run_seed, combinations_per_iter=ncomb)
    one = algorithm_one(sys, inst.b, cfg, d0=inst.d)
    d_new = one.d_final
    cfg2 = AlgorithmOneConfig(epsilon=1e-300, max_iters=iters, mode="random_combinations",
                              seed=run_seed + 1, combinations_per_iter=ncomb)
    two = algorithm_one(sys, d_new, cfg2, d0=inst.d)
    return dict(
        rep=rep, instance_seed=inst_seed, solver_seed=run_seed,
        initial_relative_distance=_rel(inst.d, inst.b),
        plateau_relative_distance=_rel(d_new, inst.b),
        plateau_absolute_distance=float(np.linalg.norm(d_new - inst.b)),
        phase1_iterations=one.iterations_used, phase1_stalled=one.stalled,
        retarget_relative_distance=_rel(two.d_final, d_new),
        phase2_iterations=two.iterations_used,
        certificate=certificate(sys, two.K_final, two.d_final, rng=run_seed + 2),
    )


def _safe_unreach(job):
    return _safe(_unreach_rep, job)


def run_unreachable_experiment(reps=50, iters=1000, spec=InstanceSpec(), seed=0,
                               combinations_per_iter=None, eps_range=0.01, workers=1, timings=False):
    """Plateau on perturbed (generically unreachable) targets vs. convergence on reached ones."""
    ncomb = combinations_per_iter or spec.m
    t0 = time.perf_counter()
    jobs = [(r, s, spec, int(iters), ncomb, eps_range) for r, s in enumerate(_substreams(seed, reps))]
    records = _run(_safe_unreach, jobs, workers)
    ok = [r for r in records if "error" not in r]
    plateau = [r["plateau_relative_distance"] for r in ok]
    retarget = [r["retarget_relative_distance"] for r in ok]
    summary = {
        "plateau>0.02": sum(v > 0.02 for v in plateau),
        "retarget<1e-10": sum(v < 1e-10 for v in retarget),
        "retarget<1e-11": sum(v < 1e-11 for v in retarget),
        "plateau (min, max)": (min(plateau, default=np.nan), max(plateau, default=np.nan)),
        "initial relative distance (min, max)": (
            min((r["initial_relative_distance"] for r in ok), default=np.nan),
            max((r["initial_relative_distance"] for r in ok), default=np.nan),
        ),
        "retarget (min, max)": (min(retarget, default=np.nan), max(retarget, default=np.nan)),
        "reference retarget (min, max)": (6.737e-22, 1.057e-12),
        "certificates passed": sum(r["certificate"]["passed"] for r in ok),
        "failed reps": len(records) - len(ok),
    }
    meta = dict(seed=seed, reps=reps, iters=int(iters), combinations_per_iter=ncomb,
                eps_range=eps_range, spec=asdict(spec))
    if timings:
        meta["seconds"] = time.perf_counter() - t0
    hists = {"re-targeted relative distance": histogram(retarget)}
    return ExperimentReport("unreachable vs reachable", meta, records, hists, summary)


# ---------------------------------------------------------------------------
# experiment two: stabilization


def _exp2_rep(job):
    rep, (inst_seed, run_seed), spec, shift = job
    inst = gen_stabilization_instance(InstanceSpec(**{**asdict(spec), "seed": inst_seed}))
    sys = inst.system
    initial = poly_roots(inst.d)
    out = stabilize_by_output_feedback(sys, shift, seed=run_seed, d0=inst.d)
    final = poly_roots(out.d_final)
    accepted = [h for h in out.history if h["status"] != "rejected"]
    rhp_up = sum(h["n_rhp"] > h["n_rhp_before"] for h in accepted)
    guarded = [h for h in accepted if h["rule"] == "guarded"]
    return dict(
        rep=rep, instance_seed=inst_seed, solver_seed=run_seed,
        bootstrap_attempts=inst.attempts,
        initial_rightmost=float(initial.real.max()),
        initial_rhp=int(np.sum(initial.real > 0)),
        success=out.success, iterations=out.iterations_used,
        final_rightmost=float(final.real.max()),
        closed_loop_abscissa=float(np.linalg.eigvals(sys.closed_loop(out.K_final)).real.max()),
        accepted_steps=len(accepted),
        forced_steps=sum(h["status"] == "forced" for h in accepted),
        rhp_count_increases=rhp_up,
        guarded_steps=len(guarded),
        guarded_rhp_count_increases=sum(h["n_rhp"] > h["n_rhp_before"] for h in guarded),
        trajectory=[[[float(z.real), float(z.imag)] for z in r] for r in out.trajectory],
        certificate=certificate(sys, out.K_final, out.d_final, rng=run_seed + 1),
    )


def _safe_exp2(job):
    return _safe(_exp2_rep, job)


def run_experiment_two(instances=10, spec=InstanceSpec(n=10, m=2, p=3), seed=0,
                       shift=ShiftConfig(), workers=1, timings=False):
    """Destabilized bootstrap instances driven back into the left half-plane."""
    t0 = time.perf_counter()
    jobs = [(r, s, spec, shift) for r, s in enumerate(_substreams(seed, instances))]
    records = _run(_safe_exp2, jobs, workers)
    ok = [r for r in records if "error" not in r]
    succ = [r for r in ok if r["success"]]
    steps = sum(r["accepted_steps"] for r in ok)
    ups = sum(r["rhp_count_increases"] for r in ok)
    summary = {
        "stabilized": len(succ),
        "max iterations (successes)": max((r["iterations"] for r in succ), default=0),
        "successes with all roots < -1e-9": sum(r["final_rightmost"] < -1e-9 for r in succ),
        "accepted steps raising RHP count": f"{ups}/{steps}",
        "guarded steps raising RHP count": "{}/{}".format(
            sum(r["guarded_rhp_count_increases"] for r in ok), sum(r["guarded_steps"] for r in ok)),
        "certificates passed": sum(r["certificate"]["passed"] for r in ok),
        "failed reps": len(records) - len(ok),
    }
    meta = dict(seed=seed, instances=instances, spec=asdict(spec), shift=asdict(shift))
    if timings:
        meta["seconds"] = time.perf_counter() - t0
    return ExperimentReport("experiment two", meta, records, {}, summary)

