"""Iterated rank-one updates: target tracking and eigenvalue shifting."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DependentPrefixError, DomainError, VerificationError
from .feedback import VERIFY_RTOL, _rank_one_core, verification_error
from .krylov import annihilating_polynomial
from .numerics import DEFAULT_TOL, Tolerance, check_monic, poly_from_roots, poly_roots

log = logging.getLogger(__name__)

MODES = ("columns_of_B", "random_combinations")


@dataclass(frozen=True)
class AlgorithmOneConfig:
    """Settings for :func:`algorithm_one`.

    ``combinations_per_iter`` only matters in ``random_combinations`` mode;
    ``None`` means one candidate per column of ``B``.
    """

    epsilon: float = 1e-10
    max_iters: int = 1000
    mode: str = "columns_of_B"
    seed: int | None = None
    combinations_per_iter: int | None = None
    stall_rtol: float = 1e-14
    max_stagnant: int = 10
    verify: bool = True
    tol: Tolerance = DEFAULT_TOL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.combinations_per_iter is not None and self.combinations_per_iter < 1:
            raise DomainError("combinations_per_iter must be >= 1")


@dataclass
class AlgorithmOneOutcome:
    """Result of :func:`algorithm_one`.

    ``history`` holds ``(iteration, ||b - d||, chosen candidate index)``
    triples; the index is ``None`` for the starting point and for
    iterations without an accepted update.
    """

    success: bool
    K_final: np.ndarray
    d_final: np.ndarray
    history: list
    iterations_used: int
    stalled: bool = False
    snapshots: dict = field(default_factory=dict)
    verification_error: float | None = None


def _unit_rows(rng, count, m):
    mus = rng.uniform(-1.0, 1.0, (count, m))
    norms = np.linalg.norm(mus, axis=1)
    norms[norms == 0] = 1.0
    return mus / norms[:, None]


def _best_candidate(A, B, C, mus, b, d, tol):
    best = None
    for j, mu in enumerate(mus):
        try:
            rho, sigma, d_new, _ = _rank_one_core(A, B, C, mu, b, d, tol)
        except DependentPrefixError:
            continue
        dist = float(np.linalg.norm(b - d_new))
        # strict comparison: ties keep the lowest index
        if best is None or dist < best[0]:
            best = (dist, j, mu, rho, d_new)
    return best


def algorithm_one(sys, b, cfg=AlgorithmOneConfig(), *, d0=None, snapshot_at=(), until=None):
    """Drive the annihilating polynomial of ``A + B K C`` toward ``b``.

    Each iteration evaluates candidate rank-one updates against the current
    matrix (one per column of ``B``, or random unit combinations), applies
    the one closest to ``b`` and rebuilds ``A + B K C`` from the original
    ``A``. The tracked polynomial is updated as ``sigma * d``.

    Parameters
    ----------
    sys : FeedbackSystem
    b : (n+1,) array_like
        Monic target polynomial.
    cfg : AlgorithmOneConfig
    d0 : array_like, optional
        Annihilating polynomial of ``sys.A``; extracted when omitted.
    snapshot_at : iterable of int
        Iteration counts at which ``(d, K)`` is copied into ``snapshots``.
    until : callable, optional
        ``until(d) -> bool``; stop as soon as it returns true.

    Returns
    -------
    AlgorithmOneOutcome
    """
    n, m, p = sys.n, sys.m, sys.p
    b = check_monic(b, "b", degree=n)
    rng = np.random.default_rng(cfg.seed)
    tol = cfg.tol
    A0, B, C = sys.A, sys.B, sys.C
    d = annihilating_polynomial(A0, rng=rng) if d0 is None else check_monic(d0, "d0", degree=n).copy()
    K = np.zeros((m, p))
    A = A0.copy()
    ncomb = cfg.combinations_per_iter or m
    snap = set(int(s) for s in snapshot_at)
    snapshots = {}

    dist = float(np.linalg.norm(b - d))
    history = [(0, dist, None)]
    stagnant = 0
    stalled = False
    it = 0
    if 0 in snap:
        snapshots[0] = (d.copy(), K.copy())
    while dist >= cfg.epsilon and it < cfg.max_iters:
        if until is not None and until(d):
            break
        it += 1
        if cfg.mode == "columns_of_B":
            best = _best_candidate(A, B, C, np.eye(m), b, d, tol)
            if best is None or dist - best[0] <= cfg.stall_rtol * dist:
                best = _best_candidate(A, B, C, _unit_rows(rng, ncomb, m), b, d, tol)
                if best is not None:
                    best = (best[0], m + best[1]) + best[2:]
        else:
            best = _best_candidate(A, B, C, _unit_rows(rng, ncomb, m), b, d, tol)

        if best is None or dist - best[0] <= cfg.stall_rtol * dist:
            stagnant += 1
            history.append((it, dist, None))
            if stagnant >= cfg.max_stagnant:
                stalled = True
                log.debug("algorithm_one: %d stagnant iterations at distance %.3e", stagnant, dist)
                break
        else:
            stagnant = 0
            dist, j, mu, rho, d = best
            K = K - np.outer(mu, rho)
            A = A0 + B @ K @ C
            history.append((it, dist, j))
        if it in snap:
            snapshots[it] = (d.copy(), K.copy())

    for s in snap:
        if s > it and s not in snapshots:
            snapshots[s] = (d.copy(), K.copy())

    err = None
    if cfg.verify:
        err = verification_error(A, d, rng)
        if err > VERIFY_RTOL:
            raise VerificationError(f"final polynomial fails independent check ({err:.3e} relative)")
    return AlgorithmOneOutcome(
        success=dist < cfg.epsilon,
        K_final=K,
        d_final=d,
        history=history,
        iterations_used=it,
        stalled=stalled,
        snapshots=snapshots,
        verification_error=err,
    )


# ---------------------------------------------------------------------------
# eigenvalue shifting


def shift_roots(d, a, b_coef, shift_all_roots=False, tol=DEFAULT_TOL):
    """Move roots left: ``z -> z - a|z| - b_coef * ||roots||``.

    Only roots with positive real part move unless ``shift_all_roots``.
    Conjugate roots receive conjugate shifts, so the result stays real.
    """
    d = check_monic(d, "d")
    r = poly_roots(d, tol)
    nrm = float(np.linalg.norm(r))
    move = np.ones(r.shape, dtype=bool) if shift_all_roots else r.real > 0
    new = r.copy()
    new[move] = r[move] - a * np.abs(r[move]) - b_coef * nrm
    return poly_from_roots(new, tol)


@dataclass(frozen=True)
class ShiftConfig:
    """Settings for :func:`stabilize_by_output_feedback`.

    ``a`` and ``b_coef`` are the starting step coefficients of the shift
    rule; they are halved after a rejected step and grown by ``grow`` after
    an accepted one, always clipped to ``a_range`` / ``b_range``.
    ``rules`` lists which variants of the shift rule generate targets at each
    step (``"guarded"`` moves only right-half-plane roots).
    """

    a: float = 0.1
    b_coef: float = 1e-3
    a_range: tuple = (1e-4, 0.1)
    b_range: tuple = (1e-6, 1e-3)
    max_total_iters: int = 200
    shift_all_roots: bool = False
    rules: tuple = ("guarded", "unguarded")
    candidates_per_rule: int = 10
    merit_margin: float = 0.01
    backtracks: int = 6
    force_after: int = 3
    grow: float = 1.5
    stability_margin: float = 1e-9
    verify: bool = True
    tol: Tolerance = DEFAULT_TOL

    def __post_init__(self):
        for name in ("a", "b_coef", "merit_margin", "grow"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not (0 < self.a_range[0] <= self.a_range[1] and 0 < self.b_range[0] <= self.b_range[1]):
            raise DomainError("parameter ranges must be positive and ordered")
        if self.max_total_iters < 1:
            raise DomainError("max_total_iters must be >= 1")
        bad = set(self.rules) - {"guarded", "unguarded"}
        if bad or not self.rules:
            raise DomainError(f"unknown shift rules {bad}")


@dataclass
class StabilizationOutcome:
    """Result of :func:`stabilize_by_output_feedback`.

    ``history`` has one dict per step (accepted, forced, or rejected);
    ``trajectory`` holds the root multiset after each applied step, starting
    with the initial roots.
    """

    success: bool
    K_final: np.ndarray
    d_final: np.ndarray
    history: list
    iterations_used: int
    trajectory: list
    verification_error: float | None = None


def _merit(roots, margin):
    return float(np.sum(np.clip(roots.real + margin, 0.0, None)))


def stabilize_by_output_feedback(sys, cfg=ShiftConfig(), one_cfg=None, *, seed=None, d0=None):
    """Shift the closed-loop spectrum into the open left half-plane.

    Every step builds shifted targets from the current polynomial, computes
    rank-one updates toward them from random input combinations, and
    backtracks along each update (an exact rank-one update for every step
    length) until the sum of real parts above ``-merit_margin`` decreases.
    The best such candidate is applied. After ``force_after`` consecutive
    steps with no improving candidate the best full step is applied anyway.
    Every step, applied or not, counts against ``max_total_iters``.

    ``one_cfg`` supplies the seed when ``seed`` is not given.
    """
    n, m, p = sys.n, sys.m, sys.p
    if seed is None and one_cfg is not None:
        seed = one_cfg.seed
    rng = np.random.default_rng(seed)
    tol = cfg.tol
    A0, B, C = sys.A, sys.B, sys.C
    d = annihilating_polynomial(A0, rng=rng) if d0 is None else check_monic(d0, "d0", degree=n).copy()
    K = np.zeros((m, p))
    A = A0.copy()
    a, bc = cfg.a, cfg.b_coef
    roots = poly_roots(d, tol)
    trajectory = [roots]
    history = []
    rejections = 0
    it = 0
    success = bool(roots.real.max() < -cfg.stability_margin)
    while not success and it < cfg.max_total_iters:
        it += 1
        m0 = _merit(roots, cfg.merit_margin)
        nrhp = int(np.sum(roots.real > 0))
        best = fallback = None
        for rule in cfg.rules:
            target = shift_roots(d, a, bc, shift_all_roots=(rule == "unguarded"), tol=tol)
            for mu in _unit_rows(rng, cfg.candidates_per_rule, m):
                try:
                    rho, _, d_full, _ = _rank_one_core(A, B, C, mu, target, d, tol)
                except DependentPrefixError:
                    continue
                r_full = poly_roots(d_full, tol)
                mf = _merit(r_full, cfg.merit_margin)
                if fallback is None or mf < fallback[0]:
                    fallback = (mf, mu, rho, d_full, r_full, rule, 1.0, target)
                t = 1.0
                for _ in range(cfg.backtracks):
                    if t == 1.0:
                        d_t, r_t, m_t = d_full, r_full, mf
                    else:
                        d_t = d + t * (d_full - d)
                        d_t[0] = 1.0
                        r_t = poly_roots(d_t, tol)
                        m_t = _merit(r_t, cfg.merit_margin)
                    if m_t < m0:
                        if best is None or m_t < best[0]:
                            best = (m_t, mu, t * rho, d_t, r_t, rule, t, target)
                        break
                    t *= 0.5

        status = "accepted"
        if best is None:
            rejections += 1
            if fallback is None or rejections < cfg.force_after:
                history.append(dict(iteration=it, status="rejected", a=a, b_coef=bc,
                                    rightmost=float(roots.real.max()), n_rhp=nrhp))
                a = max(a * 0.5, cfg.a_range[0])
                bc = max(bc * 0.5, cfg.b_range[0])
                continue
            best, status = fallback, "forced"
        rejections = 0
        _, mu, rho, d_new, r_new, rule, t, target = best
        K = K - np.outer(mu, rho)
        A = A0 + B @ K @ C
        history.append(dict(
            iteration=it, status=status, rule=rule, step=t, a=a, b_coef=bc,
            target_distance_before=float(np.linalg.norm(target - d)),
            target_distance_after=float(np.linalg.norm(target - d_new)),
            rightmost=float(r_new.real.max()), n_rhp=int(np.sum(r_new.real > 0)), n_rhp_before=nrhp,
        ))
        d, roots = d_new, r_new
        trajectory.append(roots)
        a = min(a * cfg.grow, cfg.a_range[1])
        bc = min(bc * cfg.grow, cfg.b_range[1])
        success = bool(roots.real.max() < -cfg.stability_margin)

    err = None
    if cfg.verify and np.any(K):
        err = verification_error(A, d, rng)
        if err > VERIFY_RTOL:
            raise VerificationError(f"final polynomial fails independent check ({err:.3e} relative)")
    return StabilizationOutcome(
        success=success,
        K_final=K,
        d_final=d,
        history=history,
        iterations_used=it,
        trajectory=trajectory,
        verification_error=err,
    )
