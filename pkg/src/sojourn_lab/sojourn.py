"""Survival amplitudes and (truncated / regularized) sojourn times.

The sojourn time is ``T = int |a(t)|^2 dt`` with ``a(t) = <psi, e^{-iHt} psi>``.
For a finite matrix it is always infinite, so what can be computed is the
integral over a finite horizon. On a discretized continuum this is a
faithful proxy only before level-spacing recurrences set in, which is what
the Heisenberg-time guard enforces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

HEISENBERG_FRACTION = 0.5
MIN_NODES = 4001


class QuasiContinuumWarning(UserWarning):
    """Horizon long enough for level-spacing recurrences to matter."""


@dataclass
class SojournEstimate:
    value: float
    horizon: float
    tail_bound: Optional[float]  # None: unknown
    heisenberg_time: float
    n_quad: int

    @property
    def tail_known(self) -> bool:
        return self.tail_bound is not None

    @property
    def upper_estimate(self) -> float:
        return self.value + (self.tail_bound or 0.0)


def autocorrelation(mu, t):
    """``a(t) = sum_k w_k exp(-i E_k t)`` (vectorized in ``t``)."""
    return mu.autocorrelation(t)


def nyquist_nodes(mu, horizon: float) -> int:
    """Minimum node count on ``[-horizon, horizon]`` for ``|a|^2``."""
    return int(math.ceil(2.0 * horizon * mu.oscillation_bound / math.pi)) + 1


def tail_bound(envelope, horizon: float) -> Optional[float]:
    """Two-sided tail of ``C^2 exp(-2 gamma |t|)`` beyond ``horizon``."""
    if envelope is None:
        return None
    C, gamma = envelope
    return C * C * math.exp(-2.0 * gamma * horizon) / gamma


def sojourn_truncated(mu, horizon: float, n_quad: Optional[int] = None, *,
                      envelope=None) -> SojournEstimate:
    """``int_{-horizon}^{horizon} |a(t)|^2 dt`` by composite Simpson.

    The integrand is even, so Simpson runs on ``[0, horizon]`` with
    ``n_quad // 2 + 1`` nodes and the result is doubled; this keeps the
    kink of ``|a|`` at ``t = 0`` (e.g. for ``exp(-eps|t|)``) on a node.

    Parameters
    ----------
    mu : SpectralMeasure or analytic model
    horizon : float
    n_quad : int, optional
        Node count on the full interval. Must be at least
        ``2 * horizon * bandwidth / pi``; the default is eight times that
        (and not below 4001).
    envelope : (C, gamma), optional
        Known bound ``|a(t)| <= C exp(-gamma |t|)`` used for the tail.
        Analytic models supply their own.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    guard = nyquist_nodes(mu, horizon)
    if n_quad is None:
        n_quad = max(8 * guard, MIN_NODES)
    elif n_quad < guard:
        raise ValueError(f"n_quad={n_quad} is below the Nyquist guard {guard}")
    half = n_quad // 2 + 1
    if half % 2 == 0:
        half += 1
    t = np.linspace(0.0, horizon, half)
    a2 = np.abs(mu.autocorrelation(t)) ** 2
    value = 2.0 * float(simpson(a2, x=t))

    t_h = mu.heisenberg_time()
    if horizon > HEISENBERG_FRACTION * t_h:
        warnings.warn(
            f"horizon {horizon:.4g} exceeds {HEISENBERG_FRACTION} x Heisenberg time {t_h:.4g}; "
            "recurrences contaminate the quasi-continuum sojourn",
            QuasiContinuumWarning,
            stacklevel=2,
        )
    if envelope is None:
        envelope = getattr(mu, "envelope", None)
    return SojournEstimate(value, float(horizon), tail_bound(envelope, horizon), t_h, 2 * half - 1)


def sojourn_regularized(mu, eps: float) -> float:
    """Exact ``int exp(-2 eps |t|) |a(t)|^2 dt``; never exceeds the sojourn time."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return mu.regularized_sojourn(eps)


@dataclass
class LemmaReport:
    lam: float
    eps: float
    lhs: float
    tail_bound: Optional[float]
    rhs: float
    ok: bool
    ratio: float


def lemma_bound_check(mu, lam: float, eps: float, horizon: float, *,
                      n_quad: Optional[int] = None, envelope=None,
                      tol: float = 1e-9) -> LemmaReport:
    """Compare the truncated sojourn time against ``f(eps)^2 / eps``.

    ``lhs`` is the truncated integral plus the tail bound when one is known.
    Without a known tail the comparison uses the truncated value alone,
    which can only understate the sojourn time, so ``ok`` stays meaningful.
    ``ratio = lhs / rhs`` is reported for tightness studies.
    """
    est = sojourn_truncated(mu, horizon, n_quad, envelope=envelope)
    f = float(mu.width_function(lam, eps))
    rhs = f * f / eps
    lhs = est.upper_estimate
    ratio = math.inf if rhs == 0 else lhs / rhs
    return LemmaReport(float(lam), float(eps), lhs, est.tail_bound, rhs, lhs >= rhs - tol, ratio)
