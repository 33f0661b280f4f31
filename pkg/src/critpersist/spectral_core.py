"""Spectral splittings of symmetric operators.

The splitting X = X- (+) X0 (+) X+ is computed from a dense symmetric
eigendecomposition; the Riesz contour integral is kept as an independent
cross-check path that never touches eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (ContourHitsSpectrum, DimensionMismatch, NoSpectralGap,
                     NotSymmetric, SingularResolvent)
from .grassmann import Subspace, projector

DEFAULT_ZERO_TOL = 1e-8
DEFAULT_NODES = 64
CONTOUR_CLEARANCE = 1e-10


@dataclass(frozen=True, eq=False)
class SymOperator:
    """Dense symmetric matrix standing for a self-adjoint operator."""

    entries: np.ndarray

    def __post_init__(self):
        A = np.array(self.entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionMismatch(f"operator must be a non-empty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise NotSymmetric("operator has non-finite entries")
        asym = np.abs(A - A.T).max()
        if asym > 1e-12 * (1.0 + np.abs(A).sum(axis=1).max()):
            raise NotSymmetric(f"asymmetry {asym:.3e}", asymmetry=asym)
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @classmethod
    def symmetrized(cls, A) -> "SymOperator":
        A = np.asarray(A, dtype=float)
        return cls(0.5 * (A + A.T))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eigh(self):
        return np.linalg.eigh(self.entries)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    @cached_property
    def norm(self) -> float:
        """Operator 2-norm, exact for symmetric matrices: max |eigenvalue|."""
        return float(np.abs(self.eigenvalues).max())

    def __matmul__(self, other):
        return self.entries @ other

    def __add__(self, other: "SymOperator") -> "SymOperator":
        return SymOperator.symmetrized(self.entries + other.entries)

    def __sub__(self, other: "SymOperator") -> "SymOperator":
        return SymOperator.symmetrized(self.entries - other.entries)

    def __repr__(self):
        return f"SymOperator(dim={self.dim}, norm={self.norm:.6g})"


@dataclass(frozen=True, eq=False)
class SpectralSplitting:
    x_minus: Subspace
    x_zero: Subspace
    x_plus: Subspace
    gap: float
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = self.x_minus.ambient_dim
        if self.x_minus.dim + self.x_zero.dim + self.x_plus.dim != n:
            raise DimensionMismatch("splitting dimensions do not sum to ambient dimension")
        full = np.hstack([self.x_minus.basis, self.x_zero.basis, self.x_plus.basis])
        if np.abs(full.T @ full - np.eye(n)).max() > 1e-10:
            raise DimensionMismatch("splitting subspaces are not mutually orthogonal")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.x_minus.dim, self.x_zero.dim, self.x_plus.dim

    @property
    def ambient_dim(self) -> int:
        return self.x_minus.ambient_dim


@dataclass(frozen=True)
class ContourPath:
    """Positively oriented circle in the complex plane, sampled at ``nodes`` points."""

    center: complex
    radius: float
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be positive")
        if self.nodes < 8:
            raise ValueError("contour needs at least 8 nodes")
        object.__setattr__(self, "center", complex(self.center))

    def distance_to(self, eigenvalues) -> float:
        lam = np.asarray(eigenvalues, dtype=complex)
        return float(np.abs(np.abs(lam - self.center) - self.radius).min())

    def encloses(self, eigenvalues) -> np.ndarray:
        return np.abs(np.asarray(eigenvalues, dtype=complex) - self.center) < self.radius

    def with_nodes(self, nodes: int) -> "ContourPath":
        return ContourPath(self.center, self.radius, nodes)


def default_contour(eigenvalues, lo: float, hi: float, nodes: int = DEFAULT_NODES) -> ContourPath:
    """Circle around the eigenvalues in [lo, hi].

    Centered at the midpoint of the enclosed cluster; the circle crosses the
    real axis 0.6 of the half-gap beyond the outermost enclosed eigenvalue.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    inside = lam[(lam >= lo) & (lam <= hi)]
    outside = lam[(lam < lo) | (lam > hi)]
    if inside.size == 0:
        a = b = 0.5 * (lo + hi)
    else:
        a, b = inside.min(), inside.max()
    center = 0.5 * (a + b)
    if outside.size == 0:
        gap = max(b - a, 1.0)
    else:
        gap = np.abs(outside - center).min() - 0.5 * (b - a)
    return ContourPath(center, 0.5 * (b - a) + 0.6 * 0.5 * gap, nodes)


def sign_masks(lam: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL):
    """Boolean masks (negative, kernel, positive) for eigenvalues lam.

    Eigenvalues within zero_tol*max|lam| of zero form the kernel; anything in
    the band (zero_tol, 10*zero_tol)*max|lam| is ambiguous and raises NoSpectralGap.
    """
    if not zero_tol > 0:
        raise ValueError("zero_tol must be positive")
    mag = np.abs(lam)
    thresh = zero_tol * (mag.max() if mag.size else 0.0)
    ambiguous = (mag > thresh) & (mag < 10 * thresh)
    if np.any(ambiguous):
        raise NoSpectralGap(f"eigenvalue {lam[ambiguous][0]:.3e} inside ambiguity band "
                            f"({thresh:.3e}, {10 * thresh:.3e})", eigenvalue=lam[ambiguous][0])
    return lam < -thresh, mag <= thresh, lam > thresh


def spectral_split(op: SymOperator, zero_tol: float = DEFAULT_ZERO_TOL) -> SpectralSplitting:
    """Group eigenvectors by the sign of their eigenvalue (thresholds as in sign_masks)."""
    lam, vec = op.eigh
    neg, zero, pos = sign_masks(lam, zero_tol)
    nonzero = np.abs(lam[~zero])
    gap = float(nonzero.min()) if nonzero.size else float("inf")
    return SpectralSplitting(Subspace(vec[:, neg]), Subspace(vec[:, zero]), Subspace(vec[:, pos]),
                             gap, lam)


def riesz_projector(op: SymOperator, contour: ContourPath) -> np.ndarray:
    """(1/2 pi i) * contour integral of the resolvent, by the trapezoidal rule.

    Uses only linear solves with (z I - A); the eigenvalues are consulted
    solely to reject contours that touch the spectrum.
    """
    dist = contour.distance_to(op.eigenvalues)
    if dist < CONTOUR_CLEARANCE:
        raise ContourHitsSpectrum(f"contour passes within {dist:.3e} of the spectrum", distance=dist)
    n = op.dim
    A = op.entries.astype(complex)
    eye = np.eye(n, dtype=complex)
    total = np.zeros((n, n), dtype=complex)
    for k in range(contour.nodes):
        w = contour.radius * np.exp(2j * np.pi * k / contour.nodes)
        z = contour.center + w
        try:
            resolvent = np.linalg.solve(z * eye - A, eye)
        except np.linalg.LinAlgError as exc:
            raise SingularResolvent(f"resolvent singular at z={z}") from exc
        if not np.all(np.isfinite(resolvent)):
            raise SingularResolvent(f"resolvent not finite at z={z}")
        total += w * resolvent
    return (total / contour.nodes).real


def eigen_projector(op: SymOperator, contour: ContourPath) -> np.ndarray:
    """Sum of eigenprojectors for eigenvalues enclosed by ``contour``."""
    lam, vec = op.eigh
    V = vec[:, contour.encloses(lam)]
    return V @ V.T


def verify_splitting(op: SymOperator, s: SpectralSplitting) -> dict:
    """Quadratic-form bounds of a splitting.

    The minima over the unit spheres of x_minus and x_plus are exact
    (smallest eigenvalue of the compressed form), not sampled.
    """
    if s.ambient_dim != op.dim:
        raise DimensionMismatch(f"splitting lives in R^{s.ambient_dim}, operator in R^{op.dim}")
    A = op.entries

    def _min_form(B, sign):
        if B.shape[1] == 0:
            return float("inf")
        return float(np.linalg.eigvalsh(sign * (B.T @ A @ B)).min())

    report = {
        "min_neg_ratio": _min_form(s.x_minus.basis, -1.0),
        "min_pos_ratio": _min_form(s.x_plus.basis, 1.0),
        "kernel_residual": float(np.linalg.norm(A @ s.x_zero.basis, 2)) if s.x_zero.dim else 0.0,
    }
    report["passed"] = bool(report["min_neg_ratio"] >= s.gap - 1e-10
                            and report["min_pos_ratio"] >= s.gap - 1e-10)
    return report


def splitting_projectors(s: SpectralSplitting):
    return projector(s.x_minus), projector(s.x_zero), projector(s.x_plus)


@dataclass(frozen=True, eq=False)
class AdaptedMetric:
    """Inner product in which L becomes x -> x+ - x-.

    ``gram`` is G = |L| + P0, ``transform`` is its symmetric square root, so
    <T x1, T x2> = x1^T G x2.
    """

    gram: np.ndarray
    transform: np.ndarray
    splitting: SpectralSplitting = field(repr=False)
    operator: SymOperator = field(repr=False)

    @cached_property
    def canonical_operator(self) -> np.ndarray:
        """L expressed in transform coordinates: T^{-T} L T^{-1}."""
        Tinv = np.linalg.inv(self.transform)
        C = Tinv.T @ self.operator.entries @ Tinv
        return 0.5 * (C + C.T)

    def inner(self, x1, x2) -> float:
        return float(np.asarray(x1) @ self.gram @ np.asarray(x2))


def adapted_metric(L: SymOperator, zero_tol: float = DEFAULT_ZERO_TOL) -> AdaptedMetric:
    s = spectral_split(L, zero_tol)
    lam, vec = L.eigh
    scale = np.where(np.abs(lam) <= zero_tol * L.norm, 1.0, np.abs(lam))
    gram = (vec * scale) @ vec.T
    transform = (vec * np.sqrt(scale)) @ vec.T
    return AdaptedMetric(0.5 * (gram + gram.T), 0.5 * (transform + transform.T), s, L)


def is_canonical(A: np.ndarray, tol: float = 1e-10) -> bool:
    """True when every eigenvalue of the symmetric matrix lies in {-1, 0, 1}."""
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))
    return bool(np.all(np.min(np.abs(lam[:, None] - np.array([-1.0, 0.0, 1.0])), axis=1) <= tol))
