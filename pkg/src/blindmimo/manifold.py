"""Complex Stiefel manifold primitives.

The complex Stiefel manifold St_K(C^T) is the set of T x K complex matrices
with orthonormal columns (A^H A = I_K).  This module provides the small set
of operations every solver in the package is built on: Haar-uniform sampling,
the polar-decomposition retraction, tangent-space projection of a Euclidean
gradient, and the nuclear norm.

All functions are pure; random state is owned by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ORTHONORMALITY_TOL",
    "TANGENCY_TOL",
    "RankDeficientError",
    "StiefelPoint",
    "TangentDirection",
    "random_stiefel",
    "polar_retract",
    "riemannian_grad",
    "nuclear_norm",
    "real_inner",
]

ORTHONORMALITY_TOL = 1e-9
TANGENCY_TOL = 1e-8

# Singular values below this fraction of the largest count as zero.
_RANK_RTOL = 1e-12


class RankDeficientError(ValueError):
    """A matrix that must have full column rank is numerically rank deficient.

    A vanishing singular value means the input carries no information along
    that direction, so the polar factor is not unique; callers should perturb
    the input or restart rather than accept an arbitrary completion.
    """


def real_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Real trace inner product Re tr(X^H Y).

    This is the inner product under which all first-order quantities in this
    package (gradients, optimality gaps, line searches) are measured; it is
    the real-valued pairing needed to order points on a complex manifold.
    """
    return float(np.real(np.vdot(x, y)))


@dataclass(frozen=True)
class StiefelPoint:
    """A T x K complex matrix with orthonormal columns.

    Orthonormality (``a^H a = I_K`` to Frobenius tolerance 1e-9, every column
    unit norm to 1e-9) is checked on construction; the stored array is made
    read-only so points are safe to share between threads.
    """

    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=np.complex128, copy=True, order="C")
        if a.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got ndim={a.ndim}")
        t_dim, k_dim = a.shape
        if k_dim < 1 or t_dim < 1:
            raise ValueError("dimensions must be positive")
        if k_dim > t_dim:
            raise ValueError(f"need k_dim <= t_dim, got {k_dim} > {t_dim}")
        gram = a.conj().T @ a
        gram_err = np.linalg.norm(gram - np.eye(k_dim))
        if not gram_err < ORTHONORMALITY_TOL:
            raise ValueError(
                f"columns not orthonormal: ||A^H A - I||_F = {gram_err:.3e}"
            )
        col_err = np.abs(np.linalg.norm(a, axis=0) - 1.0).max()
        if not col_err < ORTHONORMALITY_TOL:
            raise ValueError(f"column norms deviate from 1 by {col_err:.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def t_dim(self) -> int:
        return self.a.shape[0]

    @property
    def k_dim(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class TangentDirection:
    """A direction xi in the tangent space of the Stiefel manifold at ``base``.

    Tangency means base^H xi + xi^H base = 0; the Frobenius norm of that
    Hermitian combination must be below 1e-8.
    """

    xi: np.ndarray
    base: StiefelPoint

    def __post_init__(self) -> None:
        xi = np.array(self.xi, dtype=np.complex128, copy=True, order="C")
        if xi.shape != self.base.a.shape:
            raise ValueError(
                f"shape mismatch: xi {xi.shape} vs base {self.base.a.shape}"
            )
        sym = self.base.a.conj().T @ xi
        sym = sym + sym.conj().T
        err = np.linalg.norm(sym)
        if not err < TANGENCY_TOL:
            raise ValueError(f"direction not tangent: symmetry residual {err:.3e}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.xi))


def random_stiefel(t_dim: int, k_dim: int, rng: np.random.Generator) -> StiefelPoint:
    """Draw a Haar-uniform point on St_K(C^T).

    A t_dim x k_dim matrix with i.i.d. standard complex Gaussian entries is
    QR-factorised; the Q factor is phase-normalised so the R factor has a
    positive real diagonal, which makes the output exactly Haar distributed
    and a deterministic function of the Gaussian draw.
    """
    if t_dim < 1 or k_dim < 1:
        raise ValueError("dimensions must be positive")
    if k_dim > t_dim:
        raise ValueError(f"need k_dim <= t_dim, got {k_dim} > {t_dim}")
    g = rng.standard_normal((t_dim, k_dim)) + 1j * rng.standard_normal((t_dim, k_dim))
    q, r = np.linalg.qr(g / np.sqrt(2.0), mode="reduced")
    d = np.diagonal(r)
    phase = np.where(d == 0, 1.0, d / np.abs(np.where(d == 0, 1.0, d)))
    return StiefelPoint(q * phase[np.newaxis, :])


def polar_retract(m: np.ndarray) -> StiefelPoint:
    """Orthonormal polar factor U V^H of the compact SVD of ``m``.

    For full-column-rank input this is the unique maximiser of Re<m, A> over
    the Stiefel manifold, and the nearest Stiefel point in Frobenius norm.

    Raises
    ------
    RankDeficientError
        If the smallest singular value is at most 1e-12 times the largest.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[1] > m.shape[0]:
        raise ValueError(f"expected a tall matrix, got shape {m.shape}")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= _RANK_RTOL * s[0]:
        raise RankDeficientError(
            f"rank-deficient input: singular values span [{s[-1]:.3e}, {s[0]:.3e}]"
        )
    return StiefelPoint(u @ vh)


def riemannian_grad(a: StiefelPoint, euclid_grad: np.ndarray) -> TangentDirection:
    """Project a Euclidean gradient onto the tangent space at ``a``.

    Returns (I - a a^H) g + a (a^H g - g^H a) / 2, the steepest ascent
    direction on the manifold under the real trace inner product.  It
    vanishes exactly when a^H g is Hermitian and g lies in the column space
    of ``a``, the first-order stationarity condition.
    """
    g = np.asarray(euclid_grad, dtype=np.complex128)
    if g.shape != a.a.shape:
        raise ValueError(f"shape mismatch: grad {g.shape} vs point {a.a.shape}")
    b = a.a.conj().T @ g
    xi = g - a.a @ ((b + b.conj().T) / 2.0)
    return TangentDirection(xi, a)


def nuclear_norm(m: np.ndarray) -> float:
    """Sum of singular values of ``m``."""
    m = np.asarray(m)
    return float(np.linalg.svd(m, compute_uv=False).sum())
