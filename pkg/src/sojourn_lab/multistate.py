"""Two-channel block models: a binding channel coupled to a propagating one.

``H = [[H1, kappa V], [kappa V^H, H2]]`` on ``C^{d1} + C^{d2}`` with the
initial state ``psi0 + 0``. Because ``V^H psi0`` lives entirely in channel 2,
the golden-rule width only needs the resolvent of ``H2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .perturbation import PerturbedFamily, kappa_sweep, lamb_shift_lambda2
from .sojourn import sojourn_truncated
from .spectral import HermitianOperator, as_state, spectral_measure
from .width import DEFAULT_TOL, energy_width


@dataclass(eq=False)
class TwoChannelModel:
    H1: HermitianOperator
    H2: HermitianOperator
    V: np.ndarray  # d1 x d2
    kappa: float
    psi0: np.ndarray
    E0: float

    def __post_init__(self):
        self.V = np.asarray(self.V)
        if self.V.shape != (self.H1.dim, self.H2.dim):
            raise ValueError(f"V has shape {self.V.shape}, expected {(self.H1.dim, self.H2.dim)}")
        self.psi0 = as_state(self.psi0)
        if self.psi0.shape != (self.H1.dim,):
            raise ValueError("psi0 must live in channel 1")
        defect = np.linalg.norm(self.H1.matvec(self.psi0) - self.E0 * self.psi0)
        if defect > 1e-10 * self.H1.scale:
            raise ValueError(f"psi0 is not an eigenvector of H1 at E0 (defect {defect:.2e})")
        if np.sum(np.abs(self.H1.eigenvalues - self.E0) <= 1e-9 * self.H1.scale) != 1:
            raise ValueError("E0 must be a simple eigenvalue of H1")

    @property
    def dim(self) -> int:
        return self.H1.dim + self.H2.dim

    @property
    def state(self) -> np.ndarray:
        """``psi0 + 0``."""
        out = np.zeros(self.dim, dtype=self.psi0.dtype)
        out[: self.H1.dim] = self.psi0
        return out

    def with_kappa(self, kappa: float) -> "TwoChannelModel":
        return TwoChannelModel(self.H1, self.H2, self.V, kappa, self.psi0, self.E0)


def _assemble(H1: np.ndarray, H2: np.ndarray, C: np.ndarray) -> np.ndarray:
    d1 = H1.shape[0]
    dtype = np.result_type(H1, H2, C)
    out = np.zeros((d1 + H2.shape[0],) * 2, dtype=dtype)
    out[:d1, :d1] = H1
    out[d1:, d1:] = H2
    out[:d1, d1:] = C
    out[d1:, :d1] = C.conj().T
    return out


def build_block(model: TwoChannelModel, *, diagonalize: bool = True) -> HermitianOperator:
    """``[[H1, kappa V], [kappa V^H, H2]]``."""
    return HermitianOperator(_assemble(model.H1.entries, model.H2.entries, model.kappa * model.V),
                             diagonalize=diagonalize)


def as_family(model: TwoChannelModel) -> PerturbedFamily:
    """The block operator as ``H0 + kappa V`` with ``H0 = H1 + H2``."""
    zero = np.zeros_like(model.V)
    H0 = HermitianOperator(_assemble(model.H1.entries, model.H2.entries, zero))
    coupling = _assemble(np.zeros_like(model.H1.entries), np.zeros_like(model.H2.entries), model.V)
    return PerturbedFamily(H0, coupling, model.state, model.E0)


def ms_fgr(model: TwoChannelModel, eta: float) -> float:
    """``kappa^2 Im <V^H psi0, (H2 - E0 - i eta)^{-1} V^H psi0>``, nonnegative for ``eta > 0``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    u = model.V.conj().T @ model.psi0
    vals, vecs = model.H2.eig
    w = np.abs(vecs.conj().T @ u) ** 2
    g = np.sum(w / (vals - complex(model.E0, eta)))
    return float(model.kappa ** 2 * g.imag)


@dataclass
class MultistateReport:
    kappa: float
    lambda2: float
    gamma_fgr: float
    delta_e: float
    sojourn_lb: float
    sojourn_trunc: Optional[float]
    horizon: Optional[float]
    bound_ok: bool
    infinite: bool = False
    ratio: Optional[float] = field(default=None)


def ms_pipeline(model: TwoChannelModel, horizon: Optional[float] = None, *, eta: float,
                tol: float = DEFAULT_TOL, horizon_fraction: float = 0.4,
                bound_tol: float = 0.02) -> MultistateReport:
    """Width at ``lambda2``, its reciprocal and the truncated sojourn of ``psi0 + 0``.

    ``horizon`` defaults to ``horizon_fraction`` times the Heisenberg time.
    ``bound_ok`` means ``sojourn >= (1 - bound_tol) / delta_e``; the slack
    covers the finite horizon on a quasi-continuum.
    """
    gamma = ms_fgr(model, eta)
    if model.kappa == 0 or not np.any(model.V):
        return MultistateReport(model.kappa, model.E0, gamma, 0.0, math.inf, math.inf,
                                horizon, True, infinite=True)
    fam = as_family(model)
    lam2 = lamb_shift_lambda2(fam, model.kappa, eta)
    mu = spectral_measure(build_block(model), model.state)
    w = energy_width(mu, lam2, tol)
    if horizon is None:
        horizon = horizon_fraction * mu.heisenberg_time()
    trunc = sojourn_truncated(mu, horizon).value
    lb = w.sojourn_lower_bound
    ok = trunc >= (1.0 - bound_tol) * lb
    return MultistateReport(model.kappa, lam2, gamma, w.delta_e, lb, trunc, horizon, ok,
                            ratio=trunc / lb if math.isfinite(lb) else None)


def ms_sweep(model: TwoChannelModel, kappa_grid: Sequence[float], eta: float, *,
             tol: float = DEFAULT_TOL, horizon_fraction: Optional[float] = 0.4):
    """:func:`~sojourn_lab.perturbation.kappa_sweep` on the assembled block family."""
    return kappa_sweep(as_family(model), kappa_grid, eta, tol=tol, horizon_fraction=horizon_fraction)
