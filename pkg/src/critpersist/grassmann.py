"""Metric geometry of the Grassmannian of a finite-dimensional space.

Subspaces carry orthonormal bases; every metric is computed exactly
from singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AmbientMismatch, NotOrthogonal, ProjectionDegenerate

ORTHO_TOL = 1e-10
RANK_TOL = 1e-10
EQUAL_TOL = 1e-8
DEGENERATE_MARGIN = 1e-6


def orthonormalize(vectors: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis for the column span of ``vectors``.

    Pivoted QR followed by one reorthogonalization pass. Columns whose
    post-QR norm falls below ``rank_tol`` are dropped, so rank loss shows
    up as a smaller column count instead of noise.
    """
    A = np.asarray(vectors, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array of column vectors")
    n = A.shape[0]
    if A.shape[1] == 0:
        return np.zeros((n, 0))
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rank_tol))
    Q = Q[:, :rank]
    if rank:
        Q, _ = np.linalg.qr(Q)
    return Q


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^n held as an n x k orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2:
            raise ValueError("basis must be a 2-d array")
        if B.shape[1] > B.shape[0]:
            raise ValueError(f"{B.shape[1]} basis vectors in R^{B.shape[0]}")
        if B.shape[1]:
            err = np.abs(B.T @ B - np.eye(B.shape[1])).max()
            if err > ORTHO_TOL:
                raise ValueError(f"basis not orthonormal (defect {err:.3e})")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, vectors, rank_tol: float = RANK_TOL) -> "Subspace":
        """Subspace spanned by the columns of ``vectors`` (rank-revealing)."""
        return cls(orthonormalize(np.asarray(vectors, dtype=float), rank_tol))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def whole(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @classmethod
    def coordinate(cls, n: int, indices) -> "Subspace":
        """Span of the standard basis vectors e_i for i in ``indices`` (0-based)."""
        return cls(np.eye(n)[:, list(indices)])

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def complement(self) -> "Subspace":
        """Orthogonal complement in R^n."""
        n, k = self.basis.shape
        if k == 0:
            return Subspace.whole(n)
        if k == n:
            return Subspace.zero(n)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(U[:, k:])

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - projector(self) @ x) <= tol * max(1.0, np.linalg.norm(x)))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _check_ambient(V: Subspace, W: Subspace):
    if V.ambient_dim != W.ambient_dim:
        raise AmbientMismatch(f"ambient dims {V.ambient_dim} and {W.ambient_dim} differ",
                              left=V.ambient_dim, right=W.ambient_dim)


def _spectral_norm(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def projector(V: Subspace) -> np.ndarray:
    """Orthogonal projector B B^T onto ``V``."""
    return V.basis @ V.basis.T


def gap_distance(V: Subspace, W: Subspace) -> float:
    """Gap metric: spectral norm of the difference of orthogonal projectors."""
    _check_ambient(V, W)
    return _spectral_norm(projector(W) - projector(V))


def pseudodistance(V: Subspace, W: Subspace) -> float:
    """sup over unit v in V of dist(v, W); zero exactly when V is inside W."""
    _check_ambient(V, W)
    if V.dim == 0:
        return 0.0
    residual = V.basis - W.basis @ (W.basis.T @ V.basis)
    return min(_spectral_norm(residual), 1.0)


def same_subspace(V: Subspace, W: Subspace, tol: float = EQUAL_TOL) -> bool:
    return V.dim == W.dim and gap_distance(V, W) <= tol


def project_subspace(V: Subspace, W: Subspace) -> Subspace:
    """Image of ``V`` under the orthogonal projection onto ``W``.

    Only defined while pseudodistance(V, W) < 1, where the projection
    restricted to V is injective.
    """
    delta = pseudodistance(V, W)
    if delta >= 1.0 - DEGENERATE_MARGIN:
        raise ProjectionDegenerate(f"pseudodistance {delta:.6f} too close to 1; dimension would collapse",
                                   delta=delta)
    image = W.basis @ (W.basis.T @ V.basis)
    result = Subspace.span(image)
    if result.dim != V.dim:
        raise ProjectionDegenerate(f"projection lost rank ({V.dim} -> {result.dim})", delta=delta)
    return result


def projection_bound(delta: float) -> float:
    """Upper bound 2*delta/sqrt(1-delta^2) on d(V, P_W(V))."""
    return 2.0 * delta / np.sqrt(1.0 - delta * delta)


def orthogonal_sum(V: Subspace, W: Subspace, tol: float = 1e-8) -> Subspace:
    """Direct sum of two mutually orthogonal subspaces."""
    _check_ambient(V, W)
    if V.dim and W.dim:
        cross = np.abs(V.basis.T @ W.basis).max()
        if cross > tol:
            raise NotOrthogonal(f"max cross product {cross:.3e} exceeds {tol:.1e}", cross=cross)
    if W.dim == 0:
        return V
    if V.dim == 0:
        return W
    Q, _ = np.linalg.qr(np.hstack([V.basis, W.basis]))
    return Subspace(Q)


def restricted_min_singular(V: Subspace, W: Subspace) -> float:
    """Smallest singular value of the projection onto W restricted to V."""
    _check_ambient(V, W)
    if V.dim == 0:
        return 1.0
    return float(np.linalg.svd(W.basis.T @ V.basis, compute_uv=False).min())


def random_subspace(rng: np.random.Generator, n: int, k: int) -> Subspace:
    """Haar-distributed k-dimensional subspace of R^n."""
    if k == 0:
        return Subspace.zero(n)
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Subspace(Q * np.sign(np.diag(R)))


def perturb_subspace(rng: np.random.Generator, V: Subspace, size: float) -> Subspace:
    """Rotate V by exp(size * S) for a random unit-norm skew matrix S."""
    n = V.ambient_dim
    A = rng.standard_normal((n, n))
    S = A - A.T
    S /= np.linalg.norm(S, 2)
    return Subspace(scipy.linalg.expm(size * S) @ V.basis)


def selftest(instances: int = 500, seed: int = 0) -> dict:
    """Randomized check of the metric inequalities used by the reduction.

    Returns the worst slack observed for each property; a property holds
    when its worst slack is >= -1e-10.
    """
    rng = np.random.default_rng(seed)
    worst = {"triangle": np.inf, "sandwich_lower": np.inf, "sandwich_upper": np.inf,
             "oplus": np.inf, "projection_bound": np.inf, "isomorphism": np.inf}
    for _ in range(instances):
        n = int(rng.integers(2, 10))
        k = int(rng.integers(1, n))
        V1, V2, V3 = (random_subspace(rng, n, int(rng.integers(0, n + 1))) for _ in range(3))
        worst["triangle"] = min(worst["triangle"], pseudodistance(V1, V2) + pseudodistance(V2, V3)
                                - pseudodistance(V1, V3))
        A = random_subspace(rng, n, k)
        B = perturb_subspace(rng, A, float(rng.uniform(0.0, 1.5)))
        d = gap_distance(A, B)
        both = pseudodistance(A, B) + pseudodistance(B, A)
        worst["sandwich_lower"] = min(worst["sandwich_lower"], both - d)
        worst["sandwich_upper"] = min(worst["sandwich_upper"], 2 * d - both)
        if d < 1.0 - 1e-6:
            worst["isomorphism"] = min(worst["isomorphism"],
                                       restricted_min_singular(A, B) - np.sqrt(1 - d * d))
        # orthogonal quadruple: split a rotated frame into two blocks
        k1 = int(rng.integers(0, n + 1))
        k2 = int(rng.integers(0, n - k1 + 1))
        F = random_subspace(rng, n, n).basis
        G = perturb_subspace(rng, Subspace(F), float(rng.uniform(0.0, 1.0))).basis
        V1o, V2o = Subspace(F[:, :k1]), Subspace(F[:, k1:k1 + k2])
        W1o, W2o = Subspace(G[:, :k1]), Subspace(G[:, k1:k1 + k2])
        worst["oplus"] = min(worst["oplus"], gap_distance(V1o, W1o) + gap_distance(V2o, W2o)
                             - gap_distance(orthogonal_sum(V1o, V2o), orthogonal_sum(W1o, W2o)))
        V = random_subspace(rng, n, k)
        W = random_subspace(rng, n, int(rng.integers(k, n + 1)))
        delta = pseudodistance(V, W)
        if delta < 0.999:
            worst["projection_bound"] = min(worst["projection_bound"],
                                            projection_bound(delta) - gap_distance(V, project_subspace(V, W)))
    return {name: float(value) for name, value in worst.items()}
