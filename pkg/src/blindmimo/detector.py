"""Blind data detection by entrywise l3-norm maximization over the Stiefel manifold.

The detector recovers the transmitted frame from the angular-domain received
block Ybar alone (plus the known large-scale fading G) by solving

    max_{A in St_K(C^T)}  sum |Ybar A G^(-1/2)|^p,    p = 3,

with the parameter-free fixed-point iteration

    A <- Polar( p * Ybar^H (|W|^(p-2) . W) G^(-1/2) ),   W = Ybar A G^(-1/2),

which is a Frank-Wolfe step whose optimal step size is exactly 1 because the
objective is convex in A.  The conjugate transpose of the solution estimates
the frame up to a per-row phase and a row permutation; both are resolved
from the reference symbol and the user-ID headers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .manifold import (
    RankDeficientError,
    StiefelPoint,
    nuclear_norm,
    polar_retract,
    random_stiefel,
    real_inner,
    riemannian_grad,
)
from .signal import Constellation, FrameMeta

__all__ = [
    "SolverOptions",
    "SolveTrace",
    "AmbiguityResolution",
    "DetectionResult",
    "DemodResult",
    "DegenerateGradientError",
    "objective",
    "euclid_grad",
    "iterate",
    "optimality_eta",
    "solve",
    "resolve_ambiguity",
    "precondition",
    "postprocess",
    "demodulate",
    "detect",
    "riemannian_gd_baseline",
    "pilot_zf_baseline",
    "soft_threshold",
    "genie_align",
]

# Absolute slack allowed when asserting the monotone-ascent guarantee.
MONOTONE_SLACK = 1e-12

_RANK_RTOL = 1e-12


class DegenerateGradientError(RuntimeError):
    """The solver hit a rank-deficient gradient twice in a row."""


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the manifold solvers.

    ``p_exponent`` selects the objective exponent: 3 is the proposed
    detector, 4 the higher-order baseline.  The iteration stops at relative
    first-order optimality eta(A_j) < eta_tol * max(eta(A_0), 1), or when the
    relative objective increase drops below ``obj_rel_tol``, or after
    ``max_iters`` update steps, whichever happens first.

    Zero tolerances keep iterating at the converged plateau, where float64
    objective evaluations fluctuate by ~eps * objective * log(T); keep
    obj_rel_tol >= 1e-12 if the trace's monotone invariant matters.
    """

    p_exponent: int = 3
    max_iters: int = 200
    eta_tol: float = 1e-6
    obj_rel_tol: float = 1e-10
    precondition: bool = False

    def __post_init__(self) -> None:
        if self.p_exponent not in (3, 4):
            raise ValueError("p_exponent must be 3 or 4")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.eta_tol < 0 or self.obj_rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True)
class SolveTrace:
    """Per-iteration diagnostics of one solver run.

    ``objective_per_iter[j]`` and ``eta_per_iter[j]`` are measured at the
    j-th iterate, including the returned one; ``iters_run`` counts update
    steps.  The objective sequence must be non-decreasing (guaranteed ascent)
    up to 1e-12 absolute slack.  ``n_evals`` counts objective/gradient
    evaluations, the dominant cost, for cross-solver comparisons.
    """

    objective_per_iter: np.ndarray
    eta_per_iter: np.ndarray
    iters_run: int
    stop_reason: str
    n_evals: int = 0

    def __post_init__(self) -> None:
        obj = np.asarray(self.objective_per_iter, dtype=np.float64)
        eta = np.asarray(self.eta_per_iter, dtype=np.float64)
        if obj.shape != eta.shape or obj.ndim != 1 or obj.size < 1:
            raise ValueError("objective and eta traces must be equal-length vectors")
        if self.stop_reason not in ("eta_tol", "obj_tol", "max_iters"):
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")
        drops = np.diff(obj)
        if drops.size and drops.min() < -MONOTONE_SLACK:
            raise ValueError(
                f"objective trace decreased by {-drops.min():.3e}, ascent guarantee violated"
            )
        object.__setattr__(self, "objective_per_iter", obj)
        object.__setattr__(self, "eta_per_iter", eta)

    @property
    def final_objective(self) -> float:
        return float(self.objective_per_iter[-1])

    @property
    def final_eta(self) -> float:
        return float(self.eta_per_iter[-1])


def _as_matrix(a: Union[StiefelPoint, np.ndarray]) -> np.ndarray:
    return a.a if isinstance(a, StiefelPoint) else np.asarray(a, dtype=np.complex128)


def _inv_sqrt_g(g_diag: np.ndarray, k: int) -> np.ndarray:
    g = np.asarray(g_diag, dtype=np.float64)
    if g.shape != (k,) or not np.all(g > 0):
        raise ValueError("g_diag must be a strictly positive vector of length K")
    return 1.0 / np.sqrt(g)


def objective(
    y_bar: np.ndarray,
    a: Union[StiefelPoint, np.ndarray],
    g_diag: np.ndarray,
    p_exponent: int = 3,
) -> float:
    """Entrywise p-norm objective sum |Ybar A G^(-1/2)|^p."""
    am = _as_matrix(a)
    y = np.asarray(y_bar, dtype=np.complex128)
    if y.shape[1] != am.shape[0]:
        raise ValueError(f"dimension mismatch: y_bar {y.shape} vs a {am.shape}")
    w = (y @ am) * _inv_sqrt_g(g_diag, am.shape[1])[np.newaxis, :]
    return float((np.abs(w) ** p_exponent).sum())


def euclid_grad(
    y_bar: np.ndarray,
    a: Union[StiefelPoint, np.ndarray],
    g_diag: np.ndarray,
    p_exponent: int = 3,
) -> np.ndarray:
    """Euclidean (Wirtinger) gradient of the objective at ``a``.

    Returns p * Ybar^H (|W|^(p-2) . W) G^(-1/2) with W = Ybar A G^(-1/2);
    its real inner product with a direction equals the first-order change of
    the objective along that direction.
    """
    am = _as_matrix(a)
    y = np.asarray(y_bar, dtype=np.complex128)
    if y.shape[1] != am.shape[0]:
        raise ValueError(f"dimension mismatch: y_bar {y.shape} vs a {am.shape}")
    isg = _inv_sqrt_g(g_diag, am.shape[1])
    w = (y @ am) * isg[np.newaxis, :]
    weighted = np.abs(w) ** (p_exponent - 2) * w
    return p_exponent * (y.conj().T @ weighted) * isg[np.newaxis, :]


def iterate(
    a_j: StiefelPoint,
    y_bar: np.ndarray,
    g_diag: np.ndarray,
    p_exponent: int = 3,
) -> StiefelPoint:
    """One ascent step: polar retraction of the Euclidean gradient.

    The step never decreases the objective.  A rank-deficient gradient
    raises RankDeficientError, which ``solve`` treats as a restart signal.
    """
    return polar_retract(euclid_grad(y_bar, a_j, g_diag, p_exponent))


def optimality_eta(a: Union[StiefelPoint, np.ndarray], grad: np.ndarray) -> float:
    """First-order optimality gap eta = ||grad||_* - Re<a, grad>.

    This equals the largest linearized improvement max_A Re<A - a, grad>
    over the Stiefel manifold (the maximum of Re<grad, A> is the nuclear
    norm, attained at the polar factor), so it is zero exactly at stationary
    points.  Tiny negative round-off is clamped to honor the nonnegative
    contract.
    """
    am = _as_matrix(a)
    g = np.asarray(grad, dtype=np.complex128)
    if g.shape != am.shape:
        raise ValueError(f"shape mismatch: grad {g.shape} vs point {am.shape}")
    return max(nuclear_norm(g) - real_inner(am, g), 0.0)


def solve(
    y_bar: np.ndarray,
    g_diag: np.ndarray,
    opts: SolverOptions,
    rng: np.random.Generator,
    a0: Optional[StiefelPoint] = None,
    on_iterate: Optional[Callable[[StiefelPoint, int], None]] = None,
) -> Tuple[StiefelPoint, SolveTrace]:
    """Run the parameter-free fixed-point iteration from a random start.

    Each step computes the gradient, takes its compact SVD once, reads the
    optimality gap eta off the singular values, and retracts.  A rank
    deficient gradient triggers one automatic restart from a fresh random
    point; a second failure raises DegenerateGradientError.

    Parameters
    ----------
    a0
        Optional initial point (default: Haar-uniform draw from ``rng``).
    on_iterate
        Optional hook called as ``on_iterate(point, j)`` at every visited
        iterate, including the initial one.
    """
    y = np.asarray(y_bar, dtype=np.complex128)
    k = np.asarray(g_diag).shape[0]
    t = y.shape[1]
    if t < k:
        raise ValueError(f"need T >= K, got T={t}, K={k}")
    if not np.linalg.norm(y) > 0:
        raise ValueError("received block is identically zero")
    isg = _inv_sqrt_g(g_diag, k)
    yh = y.conj().T
    p = opts.p_exponent

    start = a0
    for attempt in range(2):
        a = start if start is not None else random_stiefel(t, k, rng)
        start = None
        objs: list[float] = []
        etas: list[float] = []
        eta0 = np.inf
        stop_reason = None
        degenerate = False
        for j in range(opts.max_iters + 1):
            w = (y @ a.a) * isg[np.newaxis, :]
            objs.append(float((np.abs(w) ** p).sum()))
            grad = p * (yh @ (np.abs(w) ** (p - 2) * w)) * isg[np.newaxis, :]
            u, s, vh = np.linalg.svd(grad, full_matrices=False)
            eta = max(float(s.sum()) - real_inner(a.a, grad), 0.0)
            etas.append(eta)
            if on_iterate is not None:
                on_iterate(a, j)
            if j == 0:
                eta0 = eta
            if eta < opts.eta_tol * max(eta0, 1.0):
                stop_reason = "eta_tol"
                break
            if j >= 1 and objs[-1] - objs[-2] < opts.obj_rel_tol * max(objs[-2], 1e-300):
                stop_reason = "obj_tol"
                break
            if j == opts.max_iters:
                stop_reason = "max_iters"
                break
            if s[0] == 0.0 or s[-1] <= _RANK_RTOL * s[0]:
                degenerate = True
                break
            a = StiefelPoint(u @ vh)
        if not degenerate:
            trace = SolveTrace(
                objective_per_iter=np.array(objs),
                eta_per_iter=np.array(etas),
                iters_run=len(objs) - 1,
                stop_reason=stop_reason,
                n_evals=len(objs),
            )
            return a, trace
    raise DegenerateGradientError(
        "gradient rank deficient after one restart; perturb the input"
    )


@dataclass(frozen=True)
class AmbiguityResolution:
    """How the phase-permutation ambiguity was undone.

    ``phase_corrections[i]`` is the unit-modulus factor applied to solver row
    i before matching; ``permutation[k]`` is the solver row assigned to user
    k; ``match_distances[k]`` is that row's header distance to user k's known
    ID header.  ``flagged_rows`` lists rows whose reference entry was too
    small to trust for phase recovery (assigned phase 1).
    """

    phase_corrections: np.ndarray
    permutation: np.ndarray
    match_distances: np.ndarray
    flagged_rows: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        perm = np.asarray(self.permutation, dtype=np.int64)
        k = perm.size
        if sorted(perm.tolist()) != list(range(k)):
            raise ValueError("permutation must be a bijection on 0..K-1")
        ph = np.asarray(self.phase_corrections, dtype=np.complex128)
        if ph.shape != (k,) or np.abs(np.abs(ph) - 1.0).max() >= 1e-12:
            raise ValueError("phase corrections must be unit modulus")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "phase_corrections", ph)


def resolve_ambiguity(
    a_final: Union[StiefelPoint, np.ndarray],
    frame_meta: FrameMeta,
    c: Constellation,
) -> Tuple[np.ndarray, AmbiguityResolution]:
    """Undo the per-row phase and the row permutation of a blind estimate.

    Step 1 rotates each row of ``a_final^H`` so its first entry aligns with
    the known common reference symbol.  Step 2 compares each corrected row's
    header segment with every user's known ID header and solves the minimum
    cost assignment, which always yields a true permutation; rows are then
    reordered so row k is user k.

    Rows whose reference entry has magnitude at most 1e-12 cannot anchor a
    phase; they are flagged and left unrotated.
    """
    am = _as_matrix(a_final)
    x_tilde = am.conj().T
    k, t = x_tilde.shape
    if frame_meta.k_users != k:
        raise ValueError("estimate and frame metadata disagree on K")
    ref = complex(frame_meta.ref_value)
    first = x_tilde[:, 0]
    small = np.abs(first) <= 1e-12
    safe_first = np.where(small, 1.0, first)
    phases = ref * np.abs(safe_first) / (abs(ref) * safe_first)
    phases = np.where(small, 1.0 + 0.0j, phases)
    x_tilde = phases[:, np.newaxis] * x_tilde

    hlen = frame_meta.header_len
    known = c.points[frame_meta.id_headers]  # (K, hlen) in symbol units
    got = x_tilde[:, 1 : 1 + hlen] * np.sqrt(t)
    # cost[i, k] = distance between solver row i's header and user k's header
    diff = got[:, np.newaxis, :] - known[np.newaxis, :, :]
    cost = np.linalg.norm(diff, axis=2)
    rows, users = linear_sum_assignment(cost)
    perm = np.empty(k, dtype=np.int64)
    perm[users] = rows
    x_hat = x_tilde[perm]
    resolution = AmbiguityResolution(
        phase_corrections=phases,
        permutation=perm,
        match_distances=cost[perm, np.arange(k)],
        flagged_rows=tuple(int(i) for i in np.flatnonzero(small)),
    )
    return x_hat, resolution


def precondition(y_bar: np.ndarray, k_users: Optional[int] = None) -> np.ndarray:
    """Replace Ybar by its polar factor (all retained singular values set to 1).

    Useful when the frame is too short for its Gram matrix to concentrate:
    the polar factor of Ybar restores an exactly orthonormal row space for
    the solver to work against.

    When ``k_users`` is given, only the top K singular directions are
    retained (they must clear 1e-10 of the largest).  The procedure's whole
    premise is that the preconditioned block is a rank-K signal factor plus
    a small error; keeping the trailing noise-only directions at unit gain
    instead plants dense spurious attractors that derail the solver.
    Without ``k_users`` the polar factor keeps every direction above 1e-12
    of the largest singular value.
    """
    y = np.asarray(y_bar, dtype=np.complex128)
    u, s, vh = np.linalg.svd(y, full_matrices=False)
    if s[0] == 0.0:
        raise RankDeficientError("cannot precondition an all-zero block")
    if k_users is not None:
        if k_users > s.size or s[k_users - 1] <= 1e-10 * s[0]:
            raise RankDeficientError(
                f"received block does not carry {k_users} usable directions"
            )
        return u[:, :k_users] @ vh[:k_users]
    keep = s > _RANK_RTOL * s[0]
    return u[:, keep] @ vh[keep]


def postprocess(
    y_bar_pre: np.ndarray, x_hat_pre: np.ndarray, y_bar: np.ndarray
) -> np.ndarray:
    """Map a preconditioned-domain estimate back to the data domain.

    Least-squares reprojection Xhat = (D^H D)^(-1) D^H Ybar with
    D = Ybar_pre Xhat_pre^H, followed by row normalization to unit l2 norm,
    which removes the unknown scalar left over from preconditioning (frame
    rows have unit norm by construction).
    """
    d = np.asarray(y_bar_pre) @ np.asarray(x_hat_pre).conj().T
    sv = np.linalg.svd(d, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _RANK_RTOL * sv[0]:
        raise RankDeficientError("reprojection matrix D is rank deficient")
    gram = d.conj().T @ d
    x_hat = np.linalg.solve(gram, d.conj().T @ np.asarray(y_bar))
    norms = np.linalg.norm(x_hat, axis=1, keepdims=True)
    if not np.all(norms > 0):
        raise RankDeficientError("reprojected estimate has an all-zero row")
    return x_hat / norms


class DemodResult(NamedTuple):
    """Nearest-point decisions: labels, points, and Gray-decoded bits."""

    indices: np.ndarray
    symbols: np.ndarray
    bits: np.ndarray


def demodulate(x_hat: np.ndarray, c: Constellation) -> DemodResult:
    """Map sqrt(T) * x_hat entrywise to the nearest constellation point.

    Ties break toward the smallest Gray label.  Bits are recovered through
    the Gray map.
    """
    x = np.asarray(x_hat, dtype=np.complex128)
    v = x * np.sqrt(x.shape[1])
    dist = np.abs(v[..., np.newaxis] - c.points[np.newaxis, np.newaxis, :])
    indices = np.argmin(dist, axis=-1)
    return DemodResult(indices, c.points[indices], c.bits_of(indices))


@dataclass(frozen=True)
class DetectionResult:
    """Full output of the blind detection pipeline for one block."""

    x_hat: np.ndarray
    x_hat_symbols: np.ndarray
    symbol_indices: np.ndarray
    bits: np.ndarray
    trace: SolveTrace
    resolution: AmbiguityResolution

    def __post_init__(self) -> None:
        norms = np.linalg.norm(np.asarray(self.x_hat), axis=1)
        if not (np.all(norms > 0) and np.all(norms <= 1.5)):
            raise ValueError("x_hat row norms outside the sane range (0, 1.5]")


def detect(
    y_bar: np.ndarray,
    g_diag: np.ndarray,
    frame_meta: FrameMeta,
    c: Constellation,
    opts: SolverOptions,
    rng: np.random.Generator,
    solver: Callable[..., Tuple[StiefelPoint, SolveTrace]] = solve,
) -> DetectionResult:
    """End-to-end blind detection: solve, resolve ambiguity, demodulate.

    With ``opts.precondition`` the solver runs on the polar factor of the
    received block and the estimate is reprojected onto the raw block before
    ambiguity resolution.
    """
    k = np.asarray(g_diag).shape[0]
    if opts.precondition:
        y_in = precondition(y_bar, k_users=k)
    else:
        y_in = y_bar
    a_final, trace = solver(y_in, g_diag, opts, rng)
    if opts.precondition:
        x_est = postprocess(y_in, a_final.a.conj().T, y_bar)
        x_hat, resolution = resolve_ambiguity(x_est.conj().T, frame_meta, c)
    else:
        x_hat, resolution = resolve_ambiguity(a_final, frame_meta, c)
    demod = demodulate(x_hat, c)
    return DetectionResult(
        x_hat=x_hat,
        x_hat_symbols=demod.symbols,
        symbol_indices=demod.indices,
        bits=demod.bits,
        trace=trace,
        resolution=resolution,
    )


def riemannian_gd_baseline(
    y_bar: np.ndarray,
    g_diag: np.ndarray,
    opts: SolverOptions,
    rng: np.random.Generator,
    a0: Optional[StiefelPoint] = None,
) -> Tuple[StiefelPoint, SolveTrace]:
    """Projected-gradient ascent over the Stiefel manifold with backtracking.

    Each step retracts A + tau * grad_R with tau found by halving from 1
    until the objective increases (at most 30 halvings).  Kept as a
    reference solver: it reaches the same stationary values as ``solve`` but
    spends extra evaluations on the line search.
    """
    y = np.asarray(y_bar, dtype=np.complex128)
    k = np.asarray(g_diag).shape[0]
    t = y.shape[1]
    if t < k:
        raise ValueError(f"need T >= K, got T={t}, K={k}")
    if not np.linalg.norm(y) > 0:
        raise ValueError("received block is identically zero")
    a = a0 if a0 is not None else random_stiefel(t, k, rng)
    p = opts.p_exponent
    objs = [objective(y, a, g_diag, p)]
    n_evals = 1
    etas: list[float] = []
    eta0 = np.inf
    stop_reason = "max_iters"
    for j in range(opts.max_iters + 1):
        grad = euclid_grad(y, a, g_diag, p)
        n_evals += 1
        eta = optimality_eta(a, grad)
        etas.append(eta)
        if j == 0:
            eta0 = eta
        if eta < opts.eta_tol * max(eta0, 1.0):
            stop_reason = "eta_tol"
            break
        if j == opts.max_iters:
            stop_reason = "max_iters"
            break
        direction = riemannian_grad(a, grad).xi
        tau = 1.0
        accepted = None
        for _ in range(30):
            try:
                cand = polar_retract(a.a + tau * direction)
            except RankDeficientError:
                tau /= 2.0
                continue
            cand_obj = objective(y, cand, g_diag, p)
            n_evals += 1
            if cand_obj > objs[-1]:
                accepted = (cand, cand_obj)
                break
            tau /= 2.0
        if accepted is None:
            stop_reason = "obj_tol"
            break
        a, new_obj = accepted
        objs.append(new_obj)
        if new_obj - objs[-2] < opts.obj_rel_tol * max(objs[-2], 1e-300):
            etas.append(optimality_eta(a, euclid_grad(y, a, g_diag, p)))
            n_evals += 1
            stop_reason = "obj_tol"
            break
    trace = SolveTrace(
        objective_per_iter=np.array(objs),
        eta_per_iter=np.array(etas[: len(objs)]),
        iters_run=len(objs) - 1,
        stop_reason=stop_reason,
        n_evals=n_evals,
    )
    return a, trace


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Complex soft-thresholding: shrink magnitudes by ``tau``, keep phases."""
    mag = np.abs(v)
    scale = np.maximum(0.0, 1.0 - tau / np.where(mag == 0, 1.0, mag))
    return v * scale


def pilot_zf_baseline(
    y_bar_train: np.ndarray,
    x_train: np.ndarray,
    y_bar_data: np.ndarray,
    g_diag: np.ndarray,
    lam: float,
    max_iters: int = 500,
    rel_tol: float = 1e-8,
) -> np.ndarray:
    """Training-based reference: l1-regularized channel estimate, then zero forcing.

    The angular channel is estimated from pilots by proximal-gradient
    iterations (soft thresholding) on

        min_H  (1/2) ||Ytrain - H G^(1/2) Xtrain||_F^2 + lam ||H||_1

    with step 1 / L, L the squared spectral norm of the pilot operator, run
    for ``max_iters`` iterations or until the relative update drops below
    ``rel_tol``.  Data is then detected by least squares against the
    estimated effective channel.
    """
    y_t = np.asarray(y_bar_train, dtype=np.complex128)
    x_t = np.asarray(x_train, dtype=np.complex128)
    if x_t.shape[1] < 1:
        raise ValueError("need at least one pilot symbol")
    k = x_t.shape[0]
    g = np.asarray(g_diag, dtype=np.float64)
    if g.shape != (k,) or not np.all(g > 0):
        raise ValueError("g_diag must be a strictly positive vector of length K")
    sqrt_g = np.sqrt(g)
    b = x_t * sqrt_g[:, np.newaxis]
    lip = float(np.linalg.norm(b, 2)) ** 2
    if lip == 0.0:
        raise ValueError("pilot matrix is zero")
    step = 1.0 / lip
    h = np.zeros((y_t.shape[0], k), dtype=np.complex128)
    for _ in range(max_iters):
        resid = h @ b - y_t
        h_new = soft_threshold(h - step * (resid @ b.conj().T), lam * step)
        change = np.linalg.norm(h_new - h)
        h = h_new
        if change <= rel_tol * max(np.linalg.norm(h), 1e-300):
            break
    d = h * sqrt_g[np.newaxis, :]
    sv = np.linalg.svd(d, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _RANK_RTOL * sv[0]:
        raise RankDeficientError("zero-forcing matrix is rank deficient")
    gram = d.conj().T @ d
    return np.linalg.solve(gram, d.conj().T @ np.asarray(y_bar_data))


def genie_align(x_est: np.ndarray, x_true: np.ndarray) -> np.ndarray:
    """Genie-aided alignment for debugging only (uses the true frame).

    Assigns estimate rows to true rows by maximal absolute correlation and
    fits each row's phase, sidestepping the reference-symbol protocol.  Not
    part of the blind receiver; use it to separate solver error from
    ambiguity-resolution error.
    """
    est = np.asarray(x_est, dtype=np.complex128)
    true = np.asarray(x_true, dtype=np.complex128)
    corr = est @ true.conj().T  # row-by-row correlations, estimate vs truth
    rows, users = linear_sum_assignment(-np.abs(corr))
    perm = np.empty(est.shape[0], dtype=np.int64)
    perm[users] = rows
    aligned = est[perm]
    inner = np.sum(aligned * true.conj(), axis=1)
    phases = np.where(np.abs(inner) == 0, 1.0, np.abs(inner) / inner)
    return aligned * phases[:, np.newaxis]
