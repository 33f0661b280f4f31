"""Concrete unperturbed functionals with a nondegenerate critical manifold."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import sympy as sp

from .errors import UnknownScenario
from .functional import SplitFunctional
from .manifold_bundle import CriticalManifold, sample_manifold
from .spectral_core import SymOperator

SCENARIOS = ("circle3", "twisted_circle4", "torus6", "hilbert_toy", "point_saddle")

# Z2-cuplength of the manifolds that appear here; products obey cl(A x B) >= cl(A) + cl(B).
CUPLENGTH = {"point": 0, "circle": 1, "twisted_circle": 1, "torus2": 2}


def cuplength(kind: str) -> int:
    """Cuplength lookup: 'point', 'circle', 'sphereN', 'torusN' and the manifold kinds."""
    if kind in CUPLENGTH:
        return CUPLENGTH[kind]
    if kind.startswith("sphere") and kind[6:].isdigit() and int(kind[6:]) >= 1:
        return 1
    if kind.startswith("torus") and kind[5:].isdigit() and int(kind[5:]) >= 1:
        return int(kind[5:])
    raise KeyError(f"no cuplength entry for {kind!r}")


def product_cuplength_bound(*kinds: str) -> int:
    return sum(cuplength(k) for k in kinds)


def multiplicity_bound(kind: str) -> int:
    """Number of critical points guaranteed near M: 1 + cl(M)."""
    return 1 + cuplength(kind)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    functional: SplitFunctional
    manifold: CriticalManifold
    ambient_dim: int
    notes: str = ""
    r_minus: float = 0.6
    r_plus: float = 0.1
    diameter: float = 2.0
    params: dict = field(default_factory=dict)
    seed_spec: dict = field(default_factory=lambda: {"stride": 1, "fractions": (0.0,)})

    @property
    def bound_required(self) -> int:
        return multiplicity_bound(self.manifold.kind)


def canonical_signs(diag) -> SymOperator:
    """Canonical operator with the sign pattern of a diagonal quadratic part."""
    return SymOperator(np.diag(np.sign(np.asarray(diag, dtype=float))))


def _ring(i, j):
    """Energy 1/4 (x_i^2 + x_j^2 - 1)^2 as (value, grad, hess)."""
    idx = [i, j]

    def value(x):
        s = x[i] ** 2 + x[j] ** 2 - 1.0
        return 0.25 * s * s

    def grad(x):
        g = np.zeros(x.shape[0])
        p = x[idx]
        g[idx] = (p @ p - 1.0) * p
        return g

    def hess(x):
        n = x.shape[0]
        p = x[idx]
        H = np.zeros((n, n))
        H[np.ix_(idx, idx)] = (p @ p - 1.0) * np.eye(2) + 2.0 * np.outer(p, p)
        return H

    return value, grad, hess


def _quad(coeffs):
    c = np.asarray(coeffs, dtype=float)
    D = np.diag(c)
    return (lambda x: 0.5 * float(c @ (x * x)), lambda x: c * x, lambda x: D)


def _sum_functional(L, parts, domain_check=None, name="phi"):
    def value(x):
        return sum(p[0](x) for p in parts)

    def grad(x):
        return sum(p[1](x) for p in parts)

    def hess(x):
        return sum(p[2](x) for p in parts)

    kwargs = {} if domain_check is None else {"domain_check": domain_check}
    return SplitFunctional.from_total(L, value, grad, hess, name=name, **kwargs)


def circle3(count: int = 64) -> Scenario:
    n = 3
    coeffs = [0.0, 0.0, -1.0]
    L = canonical_signs(coeffs)
    f = _sum_functional(L, [_ring(0, 1), _quad(coeffs)], name="circle3")
    M = sample_manifold("circle", n, count)
    return Scenario("circle3", f, M, n, "1/4(x^2+y^2-1)^2 - z^2/2; M = unit circle in the (x,y)-plane",
                    0.6, 0.1, 2.0, {"count": count})


def torus6(count: int = 32) -> Scenario:
    n = 6
    # x6 carries +x6^2 so the upper fiber is 3-dimensional and nondegenerate
    coeffs = [0.0, 0.0, 0.0, 0.0, -1.0, 2.0]
    L = canonical_signs(coeffs)
    f = _sum_functional(L, [_ring(0, 1), _ring(2, 3), _quad(coeffs)],
                        name="torus6")
    M = sample_manifold("torus2", n, count)
    return Scenario("torus6", f, M, n, "two ring energies - x5^2/2 + x6^2; M = flat torus S1 x S1",
                    0.7, 0.1, 2.0 * np.sqrt(2.0), {"count": count},
                    {"stride": max(1, count // 8), "fractions": (0.0,)})


def point_saddle(ambient_dim: int = 2) -> Scenario:
    n = int(ambient_dim)
    coeffs = [2.0 if k % 2 == 0 else -2.0 for k in range(n)]
    L = canonical_signs(coeffs)
    f = _sum_functional(L, [_quad(coeffs)], name="point_saddle")
    M = sample_manifold("point", n, 1)
    return Scenario("point_saddle", f, M, n, "x^2 - y^2 (alternating signs); M = {0}",
                    0.6, 0.3, 1.0, {"ambient_dim": n})


def _twisted_functions():
    x0, x1, w0, w1 = sp.symbols("x0 x1 w0 w1", real=True)
    rho2 = x0 ** 2 + x1 ** 2
    c2 = (x0 ** 2 - x1 ** 2) / rho2  # cos 2a
    s2 = 2 * x0 * x1 / rho2          # sin 2a
    # A(a) = R(a)^T diag(1,-1) R(a) = [[c2, -s2], [-s2, -c2]]
    phi = sp.Rational(1, 4) * (rho2 - 1) ** 2 + sp.Rational(1, 2) * (c2 * (w0 ** 2 - w1 ** 2) - 2 * s2 * w0 * w1)
    xs = (x0, x1, w0, w1)
    grad = [sp.diff(phi, v) for v in xs]
    hess = [[sp.diff(g, v) for v in xs] for g in grad]
    mods = ["numpy"]
    return (sp.lambdify([xs], phi, mods), sp.lambdify([xs], grad, mods), sp.lambdify([xs], hess, mods))


_TWISTED = None


def twisted_circle4(count: int = 64) -> Scenario:
    global _TWISTED
    if _TWISTED is None:
        _TWISTED = _twisted_functions()
    value, grad, hess = _TWISTED
    n = 4
    L = canonical_signs([0.0, 0.0, 1.0, -1.0])

    def domain(x):
        return x[0] ** 2 + x[1] ** 2 > 1e-6

    f = SplitFunctional.from_total(
        L, lambda x: float(value(x)), lambda x: np.array(grad(x), dtype=float),
        lambda x: np.array(hess(x), dtype=float), domain_check=domain, name="twisted_circle4")
    M = sample_manifold("twisted_circle", n, count)
    return Scenario("twisted_circle4", f, M, n,
                    "ring energy + 1/2<A(a)w,w>, A(a) = R(a)^T diag(1,-1) R(a) rotating with the angle",
                    0.3, 0.1, 2.0, {"count": count})


def hilbert_rotation(n: int, coupling: float = 0.3, decay: float = 0.5) -> np.ndarray:
    """Orthogonal exp(S), S skew, coupling the ring plane to coordinate j with weight coupling*decay^(j-2)."""
    S = np.zeros((n, n))
    for j in range(2, n):
        w = coupling * decay ** (j - 2)
        S[0, j], S[1, j] = w, 0.5 * w
    return scipy.linalg.expm(S - S.T)


def hilbert_toy(ambient_dim: int = 32, count: int = 32, coupling: float = 0.3, decay: float = 0.5) -> Scenario:
    """Ring energy in canonical coordinates y = R x; L = diag(0, 0, -1, +1, -1, ...).

    The rotation R couples the kernel plane of L to the tail with
    geometrically decaying weights, so Galerkin truncations converge
    without being exact before the full level.
    """
    n = int(ambient_dim)
    signs = np.array([0.0, 0.0] + [(-1.0 if (j % 2 == 0) else 1.0) for j in range(2, n)])
    L = SymOperator(np.diag(signs))
    R = hilbert_rotation(n, coupling, decay)

    rv, rg, rh = _ring(0, 1)
    S = np.diag(signs)

    def value(x):
        y = R @ x
        return rv(y) + 0.5 * float(signs @ (y * y))

    def grad(x):
        y = R @ x
        return R.T @ (rg(y) + signs * y)

    def hess(x):
        return R.T @ (rh(R @ x) + S) @ R

    f = SplitFunctional.from_total(L, value, grad, hess, name="hilbert_toy")
    M = sample_manifold("circle", n, count, {"frame": R.T[:, :2]})
    return Scenario("hilbert_toy", f, M, n, "rotated ring in R^n with canonical L; tail coupling decays",
                    0.6, 0.1, 2.0, {"ambient_dim": n, "count": count, "coupling": coupling, "decay": decay})


def build_scenario(name: str, params: Optional[dict] = None) -> Scenario:
    params = dict(params or {})
    builders = {"circle3": circle3, "twisted_circle4": twisted_circle4, "torus6": torus6,
                "hilbert_toy": hilbert_toy, "point_saddle": point_saddle}
    if name not in builders:
        raise UnknownScenario(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}", name=name)
    return builders[name](**params)
