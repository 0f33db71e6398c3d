"""Golden-rule widths, Lamb-shifted centres and coupling-strength sweeps.

Setting: ``H(kappa) = H0 + kappa V(kappa)`` with ``H0 psi = E0 psi``. The
boundary value ``E0 + i0`` is realized as ``E0 + i eta`` with ``eta`` inside
an admissible window of the discretized continuum: above a few level
spacings (otherwise individual levels are resolved) and below a tenth of
the bandwidth (otherwise the band edges are smeared in).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .sojourn import sojourn_truncated
from .spectral import HermitianOperator, ReducedResolvent, as_state, spectral_measure
from .width import WidthSolverError, energy_width, DEFAULT_TOL

logger = logging.getLogger(__name__)

SPACING_FACTOR = 3.0
BANDWIDTH_FRACTION = 0.1


class EtaWindowError(ValueError):
    pass


@dataclass(eq=False)
class PerturbedFamily:
    """``(H0, V, psi, E0)``; ``V`` is a fixed Hermitian matrix or a map ``kappa -> matrix``.

    ``isolation_gap`` is the distance from ``E0`` to the nearest *other
    isolated* eigenvalue; quasi-continuum levels do not count. It bounds the
    coupling strengths for which a single resonance makes sense.
    """

    H0: HermitianOperator
    V: Union[np.ndarray, Callable[[float], np.ndarray]]
    psi: np.ndarray
    E0: float
    isolation_gap: float = math.inf

    def __post_init__(self):
        self.psi = as_state(self.psi)
        if self.psi.shape != (self.H0.dim,):
            raise ValueError("psi and H0 dimensions differ")
        defect = np.linalg.norm(self.H0.matvec(self.psi) - self.E0 * self.psi)
        if defect > 1e-10 * self.H0.scale:
            raise ValueError(f"psi is not an eigenvector of H0 at E0 (defect {defect:.2e})")
        vals = self.H0.eigenvalues
        close = np.abs(vals - self.E0) <= 1e-9 * self.H0.scale
        if close.sum() != 1:
            raise ValueError("E0 must be a simple eigenvalue of H0")
        self.V_at(0.0)

    def V_at(self, kappa: float) -> np.ndarray:
        V = self.V(kappa) if callable(self.V) else self.V
        V = np.asarray(V)
        if V.shape != (self.H0.dim, self.H0.dim):
            raise ValueError("V has the wrong shape")
        if np.max(np.abs(V - V.conj().T)) > 1e-12 * max(1.0, float(np.max(np.abs(V)))):
            raise ValueError(f"V({kappa}) is not Hermitian")
        return V

    def hamiltonian(self, kappa: float) -> HermitianOperator:
        return HermitianOperator(self.H0.entries + kappa * self.V_at(kappa))

    @cached_property
    def reduced0(self) -> ReducedResolvent:
        """Reduced resolvent of ``H0`` on the complement of ``psi``."""
        return ReducedResolvent(self.H0, self.psi)

    def coupling_vector(self, kappa: float) -> np.ndarray:
        """``V(kappa) psi``; its ``P_perp`` part is taken by the reduced resolvent."""
        return self.V_at(kappa) @ self.psi

    def admissible_window(self) -> tuple[float, float]:
        red = self.reduced0
        lo = SPACING_FACTOR * red.local_spacing(self.E0)
        hi = BANDWIDTH_FRACTION * red.bandwidth
        return lo, hi


@dataclass
class FgrResult:
    kappa: float
    lambda2: float
    gamma_fgr: float
    eta_used: float
    delta_e_exact: Optional[float] = None
    width: Optional[object] = field(default=None, repr=False)

    @property
    def ratio(self) -> Optional[float]:
        """``delta_e_exact / gamma_fgr``."""
        if self.delta_e_exact is None or self.gamma_fgr == 0:
            return None
        return self.delta_e_exact / self.gamma_fgr


def _check_eta(eta: float) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    return float(eta)


def golden_rule_coefficient(fam: PerturbedFamily, eta: float) -> float:
    """``Im <P_perp V(0) psi, (H0_perp - E0 - i eta)^{-1} P_perp V(0) psi>``."""
    z = complex(fam.E0, _check_eta(eta))
    return float(fam.reduced0.expectation(fam.coupling_vector(0.0), z).imag)


def lamb_shift_lambda2(fam: PerturbedFamily, kappa: float, eta: float) -> float:
    """``E0 + kappa <V(kappa)>_psi - kappa^2 Re <R0_perp(E0 + i eta)>_{P_perp V(kappa) psi}``."""
    z = complex(fam.E0, _check_eta(eta))
    if kappa == 0:
        return float(fam.E0)
    V = fam.V_at(kappa)
    first = float(np.real(np.vdot(fam.psi, V @ fam.psi)))
    second = fam.reduced0.expectation(V @ fam.psi, z).real
    return float(fam.E0 + kappa * first - kappa * kappa * second)


def fgr_width(fam: PerturbedFamily, kappa: float, eta: float, *, exact: bool = False,
              tol: float = DEFAULT_TOL) -> FgrResult:
    """Golden-rule width ``kappa^2 Im F(0, E0 + i eta)`` and the centre ``lambda2``.

    With ``exact=True`` the Lavine width of ``psi`` with respect to
    ``H0 + kappa V(kappa)`` at ``lambda2`` is computed as well (one dense
    diagonalization).
    """
    eta = _check_eta(eta)
    gamma = kappa * kappa * golden_rule_coefficient(fam, eta)
    lam2 = lamb_shift_lambda2(fam, kappa, eta)
    res = FgrResult(float(kappa), lam2, gamma, eta)
    if exact:
        H = fam.hamiltonian(kappa)
        w = energy_width(spectral_measure(H, fam.psi), lam2, tol)
        res.delta_e_exact = w.delta_e
        res.width = w
    return res


@dataclass
class EtaExtrapolation:
    gamma_limit: float
    quality: float
    etas: np.ndarray
    gammas: np.ndarray
    window: tuple[float, float]
    slope: float


def eta_extrapolation(fam: PerturbedFamily, kappa: float, eta_list: Sequence[float], *,
                      window: Optional[tuple[float, float]] = None) -> EtaExtrapolation:
    """Linear-in-``eta`` extrapolation of the golden-rule width to ``eta -> 0``.

    ``quality`` is the RMS residual of the linear fit; a large value means
    the linear model (smooth continuum) does not describe the data.
    """
    etas = np.asarray(eta_list, dtype=float)
    if etas.size < 2:
        raise ValueError("need at least two eta values")
    if np.any(etas <= 0):
        raise ValueError("eta values must be positive")
    lo, hi = fam.admissible_window() if window is None else window
    if not lo < hi:
        raise EtaWindowError(
            f"admissible eta window [{lo:.3g}, {hi:.3g}] is empty; refine the continuum grid")
    if np.any(etas < lo):
        raise EtaWindowError(f"eta below the level-spacing floor {lo:.3g}")
    if np.any(etas > hi):
        warnings.warn(f"eta above {hi:.3g} smears the band edges", RuntimeWarning, stacklevel=2)
    coeffs = np.array([golden_rule_coefficient(fam, e) for e in etas])
    gammas = kappa * kappa * coeffs
    slope, intercept = np.polyfit(etas, gammas, 1)
    resid = gammas - (intercept + slope * etas)
    quality = float(np.sqrt(np.mean(resid ** 2)))
    return EtaExtrapolation(float(intercept), quality, etas, gammas, (lo, hi), float(slope))


def default_eta_list(fam: PerturbedFamily, n: int = 8) -> np.ndarray:
    lo, hi = fam.admissible_window()
    if not lo < hi:
        raise EtaWindowError(
            f"admissible eta window [{lo:.3g}, {hi:.3g}] is empty; refine the continuum grid")
    return np.geomspace(hi, lo, n)


@dataclass
class SweepRow:
    kappa: float
    lambda2: float
    gamma_fgr: float
    delta_e: float
    sojourn_lb: float
    sojourn_trunc: Optional[float] = None
    horizon: Optional[float] = None

    @property
    def ratio(self) -> Optional[float]:
        """Truncated sojourn over its lower bound ``1/delta_e``."""
        if self.sojourn_trunc is None or not math.isfinite(self.sojourn_lb):
            return None
        return self.sojourn_trunc / self.sojourn_lb


@dataclass
class KappaSweep:
    rows: list
    slope: float
    prefactor: float
    eta: float
    coefficient: float  # Im F(0, E0 + i eta)

    @property
    def scaled_widths(self) -> np.ndarray:
        """``delta_e / kappa^2`` for the rows with ``kappa > 0``."""
        return np.array([r.delta_e / r.kappa ** 2 for r in self.rows if r.kappa > 0])


def kappa_sweep(fam: PerturbedFamily, kappa_grid: Sequence[float], eta: float, *,
                tol: float = DEFAULT_TOL, horizon_fraction: Optional[float] = None) -> KappaSweep:
    """Exact widths at ``lambda2(kappa)`` across ``kappa_grid`` and the log-log slope.

    ``kappa = 0`` rows are allowed (they give a zero width) but excluded from
    the fit. With ``horizon_fraction`` set, each row also carries the
    truncated sojourn time over ``horizon_fraction`` times the Heisenberg
    time of the perturbed measure.
    """
    eta = _check_eta(eta)
    coeff = golden_rule_coefficient(fam, eta)
    rows = []
    for kappa in kappa_grid:
        kappa = float(kappa)
        lam2 = lamb_shift_lambda2(fam, kappa, eta)
        H = fam.H0 if kappa == 0 else fam.hamiltonian(kappa)
        mu = spectral_measure(H, fam.psi)
        try:
            w = energy_width(mu, lam2, tol)
        except WidthSolverError as exc:
            raise WidthSolverError(f"kappa={kappa}: {exc}") from exc
        if w.delta_e >= 0.5 * fam.isolation_gap:
            warnings.warn(f"kappa={kappa}: width {w.delta_e:.3g} exceeds half the isolation gap",
                          RuntimeWarning, stacklevel=2)
        row = SweepRow(kappa, lam2, kappa * kappa * coeff, w.delta_e, w.sojourn_lower_bound)
        if horizon_fraction is not None and w.delta_e > 0:
            horizon = horizon_fraction * mu.heisenberg_time()
            row.horizon = horizon
            row.sojourn_trunc = sojourn_truncated(mu, horizon).value
        logger.debug("kappa=%g lambda2=%.12g delta_e=%.6g", kappa, lam2, w.delta_e)
        rows.append(row)
    fit = [(r.kappa, r.delta_e) for r in rows if r.kappa > 0 and r.delta_e > 0]
    if len(fit) >= 2:
        k, d = np.log(np.array(fit)).T
        slope, icpt = np.polyfit(k, d, 1)
        slope, prefactor = float(slope), float(np.exp(icpt))
    else:
        slope = prefactor = math.nan
    return KappaSweep(rows, slope, prefactor, eta, coeff)
