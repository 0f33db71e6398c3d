"""Lavine energy width and the identities around it.

The width function ``f(eps) = 2 eps Im <psi, R(lam + i eps) psi>`` is
nondecreasing with range ``[0, 2]``; the energy width is the leftmost
``eps`` where it reaches one. All functions accept either a
:class:`~sojourn_lab.spectral.SpectralMeasure` or an analytic model exposing
the same ``width_function`` / ``point_weight`` interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spectral import (
    HermitianOperator,
    ReducedResolvent,
    SpectralMeasure,
    bordered_reduced_expectation,
    residual_norm,
    spectral_measure,
)

DEFAULT_TOL = 1e-10
MAX_ITER = 200
GRID_POINTS = 512
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class WidthSolverError(RuntimeError):
    pass


@dataclass
class WidthResult:
    lam: float
    delta_e: float
    f_at_solution: float
    iterations: int
    zero_width: bool
    trace: list = field(default_factory=list, repr=False)
    upper: Optional[float] = None  # end of the final bracket, f(upper) >= 1

    @property
    def sojourn_lower_bound(self) -> float:
        return math.inf if self.delta_e == 0 else 1.0 / self.delta_e


def width_function(mu, lam: float, eps):
    """``f(eps) = sum_k w_k 2 eps^2 / ((E_k - lam)^2 + eps^2)``."""
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("eps must be positive")
    return mu.width_function(lam, eps)


def energy_width(mu, lam: float, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> WidthResult:
    """Energy width of ``mu`` at ``lam`` by bisection on the monotone ``f``.

    The bracket starts at ``[0, 1]`` and its upper end is doubled until
    ``f >= 1``. Bisection stops once the bracket is narrower than ``tol``;
    ``delta_e`` is then the secant point of the final bracket, so it lies
    within ``tol`` of the crossing, and ``upper`` is the bracket end with
    ``f(upper) >= 1``. A weight of at least one half at ``lam`` itself gives
    ``f(0+) >= 1`` and hence a zero width.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = float(lam)
    if mu.point_weight(lam) >= 0.5:
        return WidthResult(lam, 0.0, 2.0 * mu.point_weight(lam), 0, True)

    trace = []
    hi = 1.0
    f_hi = float(mu.width_function(lam, hi))
    trace.append((hi, f_hi))
    while f_hi < 1.0:
        hi *= 2.0
        if hi > 1e300:
            raise WidthSolverError("width function never reaches 1; is the measure normalized?")
        f_hi = float(mu.width_function(lam, hi))
        trace.append((hi, f_hi))
    lo, f_lo = 0.0, 2.0 * mu.point_weight(lam)  # f(0+)
    it = 0
    while it < max_iter and hi - lo > max(tol, 4 * np.finfo(float).eps * hi):
        mid = 0.5 * (lo + hi)
        f_mid = float(mu.width_function(lam, mid))
        trace.append((mid, f_mid))
        if f_mid >= 1.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        it += 1
    if hi - lo > max(tol, 4 * np.finfo(float).eps * hi):
        raise WidthSolverError(f"bisection did not reach tol={tol:g} in {max_iter} iterations")
    # one secant step inside the final bracket: same certified bracket,
    # but the returned point sits at the crossing to second order
    x, f_x = hi, f_hi
    if f_hi > f_lo and lo > 0:
        x = lo + (1.0 - f_lo) * (hi - lo) / (f_hi - f_lo)
        x = min(max(x, lo), hi)
        f_x = float(mu.width_function(lam, x))
        trace.append((x, f_x))
    return WidthResult(lam, x, f_x, it, False, trace, upper=hi)


def best_lambda(mu, search_interval, tol: float = DEFAULT_TOL,
                n_grid: int = GRID_POINTS) -> tuple[float, WidthResult]:
    """Minimize ``lam -> delta_e(lam)`` over ``search_interval``.

    Golden-section search on the whole interval, then a uniform grid scan
    (the map need not be unimodal), then a second golden-section pass in
    the grid cell around the best sample. The smallest width seen is
    returned together with its ``lam``.
    """
    a, b = map(float, search_interval)
    if not a <= b:
        raise ValueError("empty search interval")
    if a == b:
        return a, energy_width(mu, a, tol)

    cache: dict[float, WidthResult] = {}

    def width_at(x: float) -> WidthResult:
        if x not in cache:
            cache[x] = energy_width(mu, x, tol)
        return cache[x]

    def golden(lo: float, hi: float) -> None:
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc, fd = width_at(c).delta_e, width_at(d).delta_e
        while hi - lo > max(tol, 1e-12 * max(1.0, abs(lo))):
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - _GOLDEN * (hi - lo)
                fc = width_at(c).delta_e
            else:
                lo, c, fc = c, d, fd
                d = lo + _GOLDEN * (hi - lo)
                fd = width_at(d).delta_e

    golden(a, b)
    grid = np.linspace(a, b, n_grid)
    widths = np.array([width_at(float(x)).delta_e for x in grid])
    i = int(np.argmin(widths))
    golden(float(grid[max(i - 1, 0)]), float(grid[min(i + 1, n_grid - 1)]))
    lam_star = min(cache, key=lambda x: (cache[x].delta_e, abs(x - grid[i])))
    return lam_star, cache[lam_star]


@dataclass
class EtupReport:
    lam: float
    delta_e: float
    residual: float
    t_lower_width: float
    t_lower_residual: float
    chain_ok: bool


def etup_chain(H: HermitianOperator, psi, lam: float, tol: float = DEFAULT_TOL) -> EtupReport:
    """Check ``1/delta_e >= 1/||(H - lam) psi||``, i.e. ``delta_e <= ||(H - lam) psi||``.

    Infinite lower bounds (zero width or zero residual) follow the usual
    ``1/0 = inf`` convention.
    """
    mu = spectral_measure(H, psi)
    res = energy_width(mu, lam, tol)
    rn = residual_norm(H, psi, lam)
    inv = lambda x: math.inf if x == 0 else 1.0 / x  # noqa: E731
    return EtupReport(
        lam=float(lam),
        delta_e=res.delta_e,
        residual=rn,
        t_lower_width=inv(res.delta_e),
        t_lower_residual=inv(rn),
        chain_ok=res.delta_e <= rn + tol,
    )


def feshbach_terms(H: HermitianOperator, psi, z: complex, *,
                   reduced: Optional[ReducedResolvent] = None) -> tuple[complex, complex]:
    """Return ``(<psi, R(z) psi>^{-1}, <psi,(H - z) psi> - F(z))``.

    ``F(z) = <psi, H P_perp (P_perp H P_perp - z)^{-1} P_perp H psi>``.
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("z must be off the real axis")
    psi = np.asarray(psi)
    mu = spectral_measure(H, psi)
    g = mu.resolvent(z)
    if g == 0:
        raise ZeroDivisionError("<psi, R(z) psi> vanished")
    red = ReducedResolvent(H, psi) if reduced is None else reduced
    F = red.expectation(H.matvec(psi), z)
    return 1.0 / g, H.expectation(psi) - z - F


def feshbach_residual(H: HermitianOperator, psi, z: complex, *,
                      reduced: Optional[ReducedResolvent] = None) -> float:
    """Absolute defect of the Feshbach reduction identity at ``z``."""
    lhs, rhs = feshbach_terms(H, psi, z, reduced=reduced)
    return abs(lhs - rhs)


def fixed_point_residual(H: HermitianOperator, psi, lam: float, delta_e: float, *,
                         reduced: Optional[ReducedResolvent] = None,
                         method: str = "complement") -> float:
    """``|delta_e - |<H>_psi - lam - F(lam + i delta_e)||``.

    A nonzero energy width solves ``delta_e = |<H> - lam - F(lam + i delta_e)|``.
    ``method="bordered"`` evaluates ``F`` by block elimination and is only
    available for diagonal ``H``.
    """
    if not delta_e > 0:
        raise ValueError("the fixed-point equation needs a positive width")
    psi = np.asarray(psi)
    z = complex(lam, delta_e)
    v = H.matvec(psi)
    if method == "bordered":
        if not H.is_diagonal:
            raise ValueError("the bordered method requires a diagonal operator")
        F = bordered_reduced_expectation(np.real(np.diag(H.entries)), psi, v, z)
    elif method == "complement":
        red = ReducedResolvent(H, psi) if reduced is None else reduced
        F = red.expectation(v, z)
    else:
        raise ValueError(f"unknown method {method!r}")
    return abs(delta_e - abs(H.expectation(psi) - lam - F))


def measure_realization(mu: SpectralMeasure) -> tuple[HermitianOperator, np.ndarray]:
    """Diagonal operator and state whose spectral measure is ``mu``."""
    H = HermitianOperator(np.diag(mu.energies), diagonalize=False)
    return H, np.sqrt(mu.weights)
