"""Functionals of the form phi(x) = 1/2 <L x, x> + psi(x)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation
from .spectral_core import SymOperator

Vector = np.ndarray


def _always(x) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class SplitFunctional:
    """Quadratic part from a fixed symmetric L plus a nonlinear remainder psi.

    ``psi_hess`` is optional; without it only finite-difference Hessians
    are available.
    """

    L: SymOperator
    psi_value: Callable[[Vector], float]
    psi_grad: Callable[[Vector], Vector]
    domain_check: Callable[[Vector], bool] = _always
    psi_hess: Optional[Callable[[Vector], np.ndarray]] = None
    name: str = "phi"

    @classmethod
    def from_total(cls, L: SymOperator, value, grad, hess=None, domain_check=_always, name="phi"):
        """Split a full functional phi into 1/2<Lx,x> + (phi - 1/2<Lx,x>)."""
        A = L.entries

        def psi_value(x):
            return value(x) - 0.5 * x @ A @ x

        def psi_grad(x):
            return grad(x) - A @ x

        psi_hess = None if hess is None else (lambda x: hess(x) - A)
        return cls(L, psi_value, psi_grad, domain_check, psi_hess, name)

    @property
    def dim(self) -> int:
        return self.L.dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainViolation(f"expected a point of R^{self.dim}, got shape {x.shape}")
        if not self.domain_check(x):
            raise DomainViolation(f"point outside the domain of {self.name}")
        return x

    def value(self, x) -> float:
        x = self._check(x)
        return float(0.5 * x @ self.L.entries @ x + self.psi_value(x))

    def grad(self, x) -> np.ndarray:
        x = self._check(x)
        return self.L.entries @ x + np.asarray(self.psi_grad(x), dtype=float)

    def hess(self, x) -> np.ndarray:
        if self.psi_hess is None:
            raise NotImplementedError(f"{self.name} has no analytic Hessian")
        x = self._check(x)
        H = self.L.entries + np.asarray(self.psi_hess(x), dtype=float)
        return 0.5 * (H + H.T)

    @property
    def has_hessian(self) -> bool:
        return self.psi_hess is not None

    def __call__(self, x) -> float:
        return self.value(x)

    def plus(self, value, grad, hess=None, name=None) -> "SplitFunctional":
        """Add a term to psi, keeping L."""
        pv, pg, ph = self.psi_value, self.psi_grad, self.psi_hess

        def psi_value(x):
            return pv(x) + value(x)

        def psi_grad(x):
            return np.asarray(pg(x)) + np.asarray(grad(x))

        psi_hess = None
        if ph is not None and hess is not None:
            def psi_hess(x):
                return np.asarray(ph(x)) + np.asarray(hess(x))

        return SplitFunctional(self.L, psi_value, psi_grad, self.domain_check, psi_hess,
                               name or f"{self.name}+perturbation")

    def negated(self) -> "SplitFunctional":
        """-phi, written with -L and -psi."""
        pv, pg, ph = self.psi_value, self.psi_grad, self.psi_hess
        return SplitFunctional(SymOperator(-self.L.entries), lambda x: -pv(x),
                               lambda x: -np.asarray(pg(x)), self.domain_check,
                               None if ph is None else (lambda x: -np.asarray(ph(x))),
                               f"-{self.name}")


def gradient_consistency(f: SplitFunctional, points, rng: np.random.Generator, h: float = 1e-6) -> float:
    """Worst relative mismatch between directional differences of phi and <grad phi, u>."""
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=float)
        u = rng.standard_normal(f.dim)
        u /= np.linalg.norm(u)
        fd = (f.value(x + h * u) - f.value(x - h * u)) / (2 * h)
        exact = f.grad(x) @ u
        worst = max(worst, abs(fd - exact) / max(1.0, abs(exact), np.linalg.norm(f.grad(x))))
    return worst
