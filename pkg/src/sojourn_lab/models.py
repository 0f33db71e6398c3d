"""Concrete models with analytic handles.

* :class:`LorentzianModel` -- Cauchy spectral measure with closed-form width.
* :func:`wigner_weisskopf` -- a level embedded in an equispaced quasi-continuum.
* :func:`driven_level_continuum` -- the same, periodically driven (Floquet input).
* :func:`predissociation_model` -- bound channel coupled to a propagating one.
* :func:`tight_binding_defect`, :func:`schrodinger_1d` -- lattice operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .spectral import HermitianOperator, SpectralMeasure


# --------------------------------------------------------------------------
# Lorentzian
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LorentzianModel:
    """``dmu = (1/pi) Gamma / ((E - E_r)^2 + Gamma^2) dE``.

    Quacks like a :class:`SpectralMeasure` for the width and sojourn code:
    its survival amplitude is ``exp(-i E_r t - Gamma |t|)``.
    """

    E_r: float
    Gamma: float

    def __post_init__(self):
        if not self.Gamma > 0:
            raise ValueError("Gamma must be positive")

    def width_function(self, lam: float, eps):
        return lorentzian_f(self, lam, eps)

    def width(self, lam: float) -> float:
        return lorentzian_width(self, lam)

    def point_weight(self, energy: float, tol: Optional[float] = None) -> float:
        return 0.0

    def autocorrelation(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-1j * self.E_r * t - self.Gamma * np.abs(t))
        return complex(out) if out.ndim == 0 else out

    def resolvent(self, z):
        z = np.asarray(z, dtype=complex)
        # Stieltjes transform of the Cauchy density, upper/lower half plane
        out = np.where(z.imag > 0, 1.0 / (self.E_r - 1j * self.Gamma - z),
                       1.0 / (self.E_r + 1j * self.Gamma - z))
        return complex(out) if out.ndim == 0 else out

    def regularized_sojourn(self, eps: float) -> float:
        return 1.0 / (eps + self.Gamma)

    def heisenberg_time(self) -> float:
        return math.inf

    @property
    def envelope(self) -> tuple[float, float]:
        return 1.0, self.Gamma

    @property
    def oscillation_bound(self) -> float:
        return self.Gamma


def lorentzian_f(model: LorentzianModel, lam: float, eps):
    """``2 eps (eps + Gamma) / ((lam - E_r)^2 + (eps + Gamma)^2)``."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    s = eps + model.Gamma
    out = 2.0 * eps * s / ((lam - model.E_r) ** 2 + s * s)
    return float(out) if out.ndim == 0 else out


def lorentzian_width(model: LorentzianModel, lam: float) -> float:
    return math.hypot(model.Gamma, lam - model.E_r)


def lorentzian_discretize(model: LorentzianModel, n: int, cutoff: float) -> SpectralMeasure:
    """Quantile discretization of the Lorentzian with its tails folded onto the cutoff.

    The mass beyond ``E_r +- cutoff`` (``1/2 - arctan(cutoff/Gamma)/pi`` on
    each side) sits in two atoms at ``E_r +- cutoff``; the core carries
    ``n - 2`` equal weights at the midpoint quantiles of the core interval.
    Nothing is renormalized, so the core of the distribution is untouched.
    """
    if n < 3:
        raise ValueError("n must be at least 3 (two tail atoms plus the core)")
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    tail = 0.5 - math.atan(cutoff / model.Gamma) / math.pi
    m = n - 2
    u = tail + (np.arange(m) + 0.5) * (1.0 - 2.0 * tail) / m
    x = model.Gamma * np.tan(np.pi * (u - 0.5))
    e = model.E_r + np.concatenate([[-cutoff], x, [cutoff]])
    w = np.concatenate([[tail], np.full(m, (1.0 - 2.0 * tail) / m), [tail]])
    return SpectralMeasure.from_points(e, w / w.sum())


# --------------------------------------------------------------------------
# Wigner-Weisskopf quasi-continuum
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WignerWeisskopfSpec:
    """A level at ``E0`` coupled to ``n_levels`` equispaced band levels.

    Band levels sit at cell midpoints ``a + (m + 1/2) s`` with
    ``s = (b - a) / n_levels``; ``coupling`` is the form factor ``g(E)``.
    """

    E0: float
    band: tuple[float, float]
    n_levels: int
    coupling: Callable[[np.ndarray], np.ndarray] = lambda e: np.ones_like(e)

    def __post_init__(self):
        a, b = self.band
        if not a < self.E0 < b:
            raise ValueError(f"E0={self.E0} is outside the band {self.band}")
        if self.n_levels < 200:
            raise ValueError("n_levels must be at least 200 for a quasi-continuum")

    @property
    def spacing(self) -> float:
        a, b = self.band
        return (b - a) / self.n_levels

    def levels(self) -> np.ndarray:
        a, _ = self.band
        return a + (np.arange(self.n_levels) + 0.5) * self.spacing

    def coupling_vector(self) -> np.ndarray:
        e = self.levels()
        return np.asarray(self.coupling(e), dtype=float) * math.sqrt(self.spacing)

    def golden_rule_coefficient(self) -> float:
        """Continuum-limit ``Im F(0, E0 + i0) = pi g(E0)^2``."""
        g0 = float(np.asarray(self.coupling(np.array([self.E0])))[0])
        return math.pi * g0 * g0


def wigner_weisskopf(spec: WignerWeisskopfSpec):
    """:class:`~sojourn_lab.perturbation.PerturbedFamily` for ``spec``.

    ``H0 = diag(E0, E_1..E_n)``, ``psi = e_0`` and
    ``V = |e_0><v| + |v><e_0|`` with ``v_m = g(E_m) sqrt(spacing)``, which
    makes ``sum_m v_m^2 eta / ((E_m - E0)^2 + eta^2) -> pi g(E0)^2``
    independently of ``n_levels``.
    """
    from .perturbation import PerturbedFamily

    e = spec.levels()
    if np.min(np.abs(e - spec.E0)) <= 1e-9 * max(1.0, float(np.max(np.abs(e)))):
        raise ValueError("E0 coincides with a band level; shift E0 or change n_levels")
    n = spec.n_levels + 1
    H0 = np.diag(np.concatenate([[spec.E0], e]))
    v = spec.coupling_vector()
    V = np.zeros((n, n))
    V[0, 1:] = v
    V[1:, 0] = v
    psi = np.zeros(n)
    psi[0] = 1.0
    return PerturbedFamily(HermitianOperator(H0), V, psi, spec.E0)


# --------------------------------------------------------------------------
# Driven level + continuum (Floquet)
# --------------------------------------------------------------------------

def driven_level_continuum(E0: float, band: tuple[float, float], n_levels: int, omega: float,
                           kappa: float, *, g: float = 1.0, second_level: Optional[float] = None,
                           rabi: float = 0.0, N: int = 4):
    """Bound level (plus an optional second discrete level) and a band, with
    a monochromatic drive ``V(t) = 2 cos(omega t) V_1``.

    ``V_1`` couples ``psi = e_0`` to every band level with amplitude
    ``g sqrt(spacing)`` and, if ``second_level`` is given, to that level with
    amplitude ``rabi``. There is no static coupling, so the drive alone
    makes the level decay, through the sidebands ``E0 +- omega``.

    Returns ``(FloquetProblem, psi)``.
    """
    from .floquet import FloquetProblem

    a, b = band
    s = (b - a) / n_levels
    levels = a + (np.arange(n_levels) + 0.5) * s
    diag = [E0] + ([second_level] if second_level is not None else []) + list(levels)
    d = len(diag)
    off = 1 if second_level is None else 2
    V1 = np.zeros((d, d))
    V1[0, off:] = g * math.sqrt(s)
    V1[off:, 0] = g * math.sqrt(s)
    if second_level is not None:
        V1[0, 1] = V1[1, 0] = rabi
    psi = np.zeros(d)
    psi[0] = 1.0
    fp = FloquetProblem(HermitianOperator(np.diag(diag)), {1: V1, -1: V1}, omega, N, kappa)
    return fp, psi


# --------------------------------------------------------------------------
# Two-channel predissociation toy
# --------------------------------------------------------------------------

def predissociation_model(*, n_bound: int = 5, bound_spacing: float = 1.5, E0: float = 0.0,
                          band: tuple[float, float] = (-2.0, 2.0), n_levels: int = 2000,
                          g: float = 1.3, kappa: float = 0.1, index: int = 2):
    """Harmonic bound channel against a flat propagating band.

    Channel 1 has levels ``E0 + (j - index) * bound_spacing``; ``psi0`` is
    level ``index`` (energy ``E0``). Channel 2 is the equispaced band. Every
    bound level couples to every band level with ``g sqrt(spacing)``, with
    an alternating sign so that channel-1 levels are not all alike.
    """
    from .multistate import TwoChannelModel

    e1 = E0 + (np.arange(n_bound) - index) * bound_spacing
    a, b = band
    s = (b - a) / n_levels
    e2 = a + (np.arange(n_levels) + 0.5) * s
    signs = (-1.0) ** np.arange(n_bound)
    V = np.outer(signs, np.full(n_levels, g * math.sqrt(s)))
    psi0 = np.zeros(n_bound)
    psi0[index] = 1.0
    return TwoChannelModel(HermitianOperator(np.diag(e1)), HermitianOperator(np.diag(e2)),
                           V, kappa, psi0, float(E0))


# --------------------------------------------------------------------------
# Lattice operators
# --------------------------------------------------------------------------

def _laplacian_1d(n: int, dx: float, boundary: str) -> np.ndarray:
    """Three-point ``d^2/dx^2``."""
    lap = (np.diag(np.full(n - 1, 1.0), 1) + np.diag(np.full(n - 1, 1.0), -1)
           - 2.0 * np.eye(n)) / dx ** 2
    if boundary == "periodic":
        lap[0, -1] = lap[-1, 0] = 1.0 / dx ** 2
    elif boundary != "dirichlet":
        raise ValueError(f"unknown boundary {boundary!r}")
    return lap


def tight_binding_defect(L: int, hopping: float, defect_energy: float, *,
                         boundary: str = "dirichlet"):
    """Nearest-neighbour chain of ``L`` sites with an on-site defect in the middle.

    Returns ``(H, defect_state)`` where ``defect_state`` is the eigenvector
    with the largest amplitude on the defect site (the bound state when
    ``|defect_energy|`` is large enough to split one off the band).
    """
    if L < 200:
        raise ValueError("L must be at least 200")
    h = hopping * (np.diag(np.ones(L - 1), 1) + np.diag(np.ones(L - 1), -1))
    if boundary == "periodic":
        h[0, -1] = h[-1, 0] = hopping
    elif boundary != "dirichlet":
        raise ValueError(f"unknown boundary {boundary!r}")
    site = L // 2
    h[site, site] = defect_energy
    H = HermitianOperator(h)
    k = int(np.argmax(np.abs(H.eigenvectors[site, :])))
    state = H.eigenvectors[:, k].copy()
    if state[site] < 0:
        state = -state
    return H, state


def schrodinger_1d(grid, W, *, boundary: str = "periodic") -> HermitianOperator:
    """``-1/2 d^2/dx^2 + W(x)`` with the three-point stencil on a uniform grid.

    ``W`` is either an array of samples or a callable evaluated on ``grid``.
    For periodic boundaries the grid must not repeat its first point.
    """
    x = np.asarray(grid, dtype=float)
    dx = float(x[1] - x[0])
    if not np.allclose(np.diff(x), dx, rtol=1e-10, atol=0):
        raise ValueError("grid must be uniform")
    w = W(x) if callable(W) else np.asarray(W, dtype=float)
    return HermitianOperator(-0.5 * _laplacian_1d(x.size, dx, boundary) + np.diag(w))
