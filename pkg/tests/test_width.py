import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sojourn_lab.models import LorentzianModel, WignerWeisskopfSpec, lorentzian_width, wigner_weisskopf
from sojourn_lab.spectral import HermitianOperator, SpectralMeasure, spectral_measure
from sojourn_lab.width import (
    best_lambda,
    energy_width,
    etup_chain,
    feshbach_residual,
    feshbach_terms,
    fixed_point_residual,
    measure_realization,
    width_function,
)

from conftest import random_hermitian, random_state

seeds = st.integers(0, 2**32 - 1)
TWO_POINT = SpectralMeasure.from_points([-1.0, 1.0], [0.5, 0.5])


def random_measure(seed, n=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(1, 15))
    return spectral_measure(HermitianOperator(random_hermitian(rng, n)), random_state(rng, n))


# -- width function -------------------------------------------------------------

def test_f_point_mass_is_two():
    mu = SpectralMeasure.point_mass(0.4)
    assert np.allclose(width_function(mu, 0.4, np.array([1e-3, 1.0, 50.0])), 2.0)


def test_f_two_point_closed_form():
    eps = np.array([0.1, 0.5, 1.0, 3.0])
    assert np.allclose(width_function(TWO_POINT, 0.0, eps), 2 * eps**2 / (1 + eps**2))
    assert np.isclose(width_function(TWO_POINT, 0.0, 1.0), 1.0)


def test_f_lorentzian_closed_form():
    m = LorentzianModel(0.2, 0.5)
    eps = np.linspace(0.1, 3, 7)
    lam = 0.9
    expected = 2 * eps * (eps + 0.5) / ((lam - 0.2) ** 2 + (eps + 0.5) ** 2)
    assert np.allclose(width_function(m, lam, eps), expected)


def test_f_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        width_function(TWO_POINT, 0.0, 0.0)


@given(seeds, st.floats(-3, 3), st.floats(1e-4, 10), st.floats(1e-4, 10))
def test_f_monotone_and_bounded(seed, lam, e1, e2):
    mu = random_measure(seed)
    lo, hi = sorted((e1, e2))
    f_lo, f_hi = width_function(mu, lam, lo), width_function(mu, lam, hi)
    assert 0.0 <= f_lo <= f_hi + 1e-15 <= 2.0 + 1e-15


@given(seeds, st.floats(-3, 3))
def test_f_large_eps_limit(seed, lam):
    mu = random_measure(seed)
    eps = 1e6 * max(mu.spectral_radius, abs(lam), 1.0)
    assert abs(width_function(mu, lam, eps) - 2.0) <= 1e-4


# -- energy width -----------------------------------------------------------------

def test_width_lorentzian_at_centre():
    assert abs(energy_width(LorentzianModel(1.0, 0.3), 1.0).delta_e - 0.3) <= 1e-9


def test_width_lorentzian_off_centre():
    m = LorentzianModel(0.0, 1.0)
    assert abs(energy_width(m, 1.0).delta_e - math.sqrt(2)) <= 1e-9
    for lam in np.linspace(-3, 3, 13):
        assert abs(energy_width(m, lam).delta_e - lorentzian_width(m, lam)) <= 1e-9


def test_width_point_mass_zero():
    w = energy_width(SpectralMeasure.point_mass(0.7), 0.7)
    assert w.zero_width and w.delta_e == 0.0
    assert w.sojourn_lower_bound == math.inf


def test_width_two_point():
    w = energy_width(TWO_POINT, 0.0, tol=1e-12)
    assert abs(w.delta_e - 1.0) <= 1e-12
    assert not w.zero_width


def test_width_half_weight_at_lambda_is_zero():
    mu = SpectralMeasure.from_points([0.0, 2.0], [0.5, 0.5])
    assert energy_width(mu, 0.0).delta_e == 0.0


def test_width_small_weight_at_lambda_positive():
    mu = SpectralMeasure.from_points([0.0, 2.0], [0.3, 0.7])
    assert energy_width(mu, 0.0).delta_e > 0


def test_width_rejects_bad_tol():
    with pytest.raises(ValueError):
        energy_width(TWO_POINT, 0.0, tol=0.0)


@given(seeds, st.floats(-3, 3))
def test_width_definition_consistency(seed, lam):
    mu = random_measure(seed)
    w = energy_width(mu, lam)
    assert w.delta_e >= 0
    if w.delta_e > 0:
        # f crosses one inside the final bracket
        assert width_function(mu, lam, w.upper) >= 1.0
        assert w.upper - w.delta_e <= 1e-10
        assert width_function(mu, lam, max(w.upper - 1e-10, 1e-300)) <= 1.0 + 1e-12
        slope_bound = 4.0 / w.delta_e
        assert abs(w.f_at_solution - 1.0) <= slope_bound * 1e-10 + 1e-12


# -- best lambda --------------------------------------------------------------------

def test_best_lambda_lorentzian():
    lam, w = best_lambda(LorentzianModel(0.3, 0.2), (-1.0, 1.0))
    # delta_e is quadratic at the minimum, so lam is pinned to ~sqrt(tol * Gamma)
    assert abs(lam - 0.3) <= 1e-4
    assert abs(w.delta_e - 0.2) <= 1e-9


def test_best_lambda_symmetric_two_point():
    # delta_e(lam) = sqrt(1 - lam^2) on (-1, 1): symmetric, maximal at 0, so the
    # minimizer is an endpoint and its mirror image gives the same width
    for lam in np.linspace(-0.9, 0.9, 7):
        assert abs(energy_width(TWO_POINT, lam).delta_e - math.sqrt(1 - lam**2)) <= 1e-9
    lam, w = best_lambda(TWO_POINT, (-0.8, 0.8))
    assert abs(abs(lam) - 0.8) <= 1e-9
    assert abs(w.delta_e - energy_width(TWO_POINT, -lam).delta_e) <= 1e-12
    lam, w = best_lambda(TWO_POINT, (-1.5, 1.5))
    assert abs(abs(lam) - 1.0) <= 1e-6 and w.delta_e == 0.0


def test_best_lambda_wigner_weisskopf_grid_oracle():
    fam = wigner_weisskopf(WignerWeisskopfSpec(0.0, (-2.0, 2.0), 400))
    kappa = 0.2
    mu = spectral_measure(fam.hamiltonian(kappa), fam.psi)
    lam, w = best_lambda(mu, (-0.2, 0.2))
    grid = np.linspace(-0.2, 0.2, 2001)
    scan = min(energy_width(mu, x).delta_e for x in grid)
    assert w.delta_e <= scan + 1e-9
    assert abs(lam) <= 5 * kappa**2


# -- ETUP chain -------------------------------------------------------------------------

def test_etup_eigenpair():
    H = HermitianOperator(np.diag([1.0, 3.0]))
    rep = etup_chain(H, [1.0, 0.0], 1.0)
    assert rep.chain_ok
    assert rep.t_lower_width == math.inf and rep.t_lower_residual == math.inf


def test_etup_two_point_equality_edge():
    H = HermitianOperator(np.diag([-1.0, 1.0]))
    rep = etup_chain(H, np.array([1.0, 1.0]) / np.sqrt(2), 0.0)
    assert rep.chain_ok
    assert abs(rep.delta_e - 1.0) <= 1e-10 and abs(rep.residual - 1.0) <= 1e-14


def test_etup_randomized_suite(rng):
    for _ in range(200):
        n = int(rng.integers(2, 17))
        rep = etup_chain(HermitianOperator(random_hermitian(rng, n)), random_state(rng, n),
                         float(rng.uniform(-3, 3)))
        assert rep.chain_ok


# -- Feshbach --------------------------------------------------------------------------

def test_feshbach_two_by_two_closed_form():
    a, b, d = 0.3, 0.7 - 0.2j, -1.1
    H = HermitianOperator([[a, b], [np.conj(b), d]])
    z = 0.1 + 0.4j
    lhs, rhs = feshbach_terms(H, [1.0, 0.0], z)
    assert abs(rhs - ((a - z) - abs(b) ** 2 / (d - z))) <= 1e-12
    assert abs(lhs - rhs) <= 1e-12


def test_feshbach_decoupled():
    H = HermitianOperator(np.diag([0.3, -1.0, 2.0]))
    assert feshbach_residual(H, [1.0, 0.0, 0.0], 0.5 + 0.2j) <= 1e-13


def test_feshbach_random_fifty(rng):
    A = random_hermitian(rng, 50)
    H = HermitianOperator(A)
    psi = random_state(rng, 50)
    for lam in np.linspace(-5, 5, 5):
        for eps in np.geomspace(1e-2, 10, 5):
            assert feshbach_residual(H, psi, complex(lam, eps)) <= 1e-9 * H.scale


def test_feshbach_rejects_real_z():
    with pytest.raises(ValueError):
        feshbach_residual(HermitianOperator(np.eye(2)), [1.0, 0.0], 0.5)


def test_feshbach_conditioning_is_linear(rng):
    A = random_hermitian(rng, 12)
    psi = random_state(rng, 12)
    z = 0.2 + 0.3j
    base = feshbach_residual(HermitianOperator(A), psi, z)
    E = random_hermitian(rng, 12)
    res = []
    for delta in (1e-14, 1e-13):
        r = feshbach_residual(HermitianOperator(A + delta * E), psi, z)
        res.append(r)
    # residual stays at rounding level; no amplification beyond a modest factor
    assert max(res) <= 1e3 * max(base, 1e-15) + 1e-12


# -- fixed point ----------------------------------------------------------------------

def test_fixed_point_two_point():
    H = HermitianOperator(np.diag([-1.0, 1.0]))
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    w = energy_width(spectral_measure(H, psi), 0.0)
    assert fixed_point_residual(H, psi, 0.0, w.delta_e) <= 1e-10


def test_fixed_point_two_by_two_analytic():
    # psi = e0 in [[a, b], [b, d]]: f(eps) = 2 eps Im <R> solved in closed form by bisection oracle
    a, b, d = 0.0, 0.6, 1.5
    H = HermitianOperator([[a, b], [b, d]])
    w = energy_width(spectral_measure(H, [1.0, 0.0]), 0.2, tol=1e-12)
    assert fixed_point_residual(H, [1.0, 0.0], 0.2, w.delta_e) <= 1e-8


def test_fixed_point_detects_wrong_root(rng):
    A = random_hermitian(rng, 10)
    psi = random_state(rng, 10)
    H = HermitianOperator(A)
    w = energy_width(spectral_measure(H, psi), 0.1)
    good = fixed_point_residual(H, psi, 0.1, w.delta_e)
    bad = fixed_point_residual(H, psi, 0.1, 1.5 * w.delta_e)
    assert bad > 10 * good


def test_fixed_point_rejects_zero_width():
    with pytest.raises(ValueError):
        fixed_point_residual(HermitianOperator(np.eye(2)), [1.0, 0.0], 1.0, 0.0)


def test_fixed_point_bordered_on_realization():
    mu = SpectralMeasure.from_points(np.linspace(-1, 1, 301), np.full(301, 1 / 301))
    H, psi = measure_realization(mu)
    w = energy_width(mu, 0.05)
    a = fixed_point_residual(H, psi, 0.05, w.delta_e, method="bordered")
    b = fixed_point_residual(H, psi, 0.05, w.delta_e)
    assert a <= 1e-9 and b <= 1e-9
