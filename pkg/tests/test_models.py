import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from sojourn_lab.models import (
    LorentzianModel,
    WignerWeisskopfSpec,
    lorentzian_discretize,
    lorentzian_f,
    lorentzian_width,
    predissociation_model,
    schrodinger_1d,
    tight_binding_defect,
    wigner_weisskopf,
)
from sojourn_lab.perturbation import default_eta_list, eta_extrapolation, golden_rule_coefficient
from sojourn_lab.width import energy_width


# -- Lorentzian -----------------------------------------------------------------------

def test_lorentzian_centre_width_is_gamma():
    m = LorentzianModel(0.4, 0.3)
    assert math.isclose(lorentzian_f(m, 0.4, 0.3), 1.0)
    assert math.isclose(lorentzian_width(m, 0.4), 0.3)


def test_lorentzian_off_centre_sqrt_two():
    assert math.isclose(lorentzian_width(LorentzianModel(0.0, 1.0), 1.0), math.sqrt(2))
    assert math.isclose(lorentzian_f(LorentzianModel(0.0, 1.0), 1.0, math.sqrt(2)), 1.0)


def test_lorentzian_f_large_eps():
    assert abs(lorentzian_f(LorentzianModel(0.0, 1.0), 0.3, 1e9) - 2.0) <= 1e-8


def test_lorentzian_rejects_bad_inputs():
    with pytest.raises(ValueError):
        LorentzianModel(0.0, 0.0)
    with pytest.raises(ValueError):
        lorentzian_f(LorentzianModel(0.0, 1.0), 0.0, -1.0)


def test_lorentzian_f_matches_measure_integral():
    m = LorentzianModel(0.2, 0.6)
    lam, eps = -0.3, 0.8
    dens = lambda x: m.Gamma / math.pi / ((x - m.E_r) ** 2 + m.Gamma**2)  # noqa: E731
    ref = quad(lambda x: 2 * eps**2 / ((x - lam) ** 2 + eps**2) * dens(x), -np.inf, np.inf)[0]
    assert abs(lorentzian_f(m, lam, eps) - ref) <= 1e-9


def test_lorentzian_autocorrelation_is_exponential():
    m = LorentzianModel(0.5, 0.2)
    t = np.linspace(-10, 10, 9)
    assert np.allclose(m.autocorrelation(t), np.exp(-0.5j * t - 0.2 * np.abs(t)))


def test_discretized_width_n4001():
    m = LorentzianModel(0.0, 1.0)
    mu = lorentzian_discretize(m, 4001, 50.0)
    assert abs(energy_width(mu, 0.0).delta_e - 1.0) <= 1e-3


def test_discretized_total_weight():
    mu = lorentzian_discretize(LorentzianModel(1.0, 2.0), 1001, 100.0)
    assert abs(mu.weights.sum() - 1.0) <= 1e-12
    assert mu.energies.min() >= 1.0 - 100.0 - 1e-12 and mu.energies.max() <= 101.0 + 1e-12


def _clamped_oracle(gamma, cutoff, lam):
    """Width of the Lorentzian with its tails moved onto +-cutoff (continuous core)."""
    tail = 0.5 - math.atan(cutoff / gamma) / math.pi

    def f(eps):
        g = lambda x: 2 * eps**2 / ((x - lam) ** 2 + eps**2) * gamma / (math.pi * (x * x + gamma**2))  # noqa: E731
        core = quad(g, -cutoff, cutoff, points=[lam], epsabs=1e-14, epsrel=1e-13, limit=500)[0]
        return core + tail * sum(2 * eps**2 / ((s * cutoff - lam) ** 2 + eps**2) for s in (1, -1))

    return brentq(lambda e: f(e) - 1.0, 1e-3, 50.0, xtol=1e-15)


@pytest.mark.parametrize("lam", [0.0, 0.7])
def test_discretization_convergence_table(lam):
    m = LorentzianModel(0.0, 1.0)
    cutoff = 50.0
    oracle = _clamped_oracle(1.0, cutoff, lam)
    ns = [250, 500, 1000, 2000, 4000]
    errs = [abs(energy_width(lorentzian_discretize(m, n, cutoff), lam, tol=1e-13).delta_e - oracle)
            for n in ns]
    total = [abs(energy_width(lorentzian_discretize(m, n, cutoff), lam, tol=1e-13).delta_e
                 - lorentzian_width(m, lam)) for n in ns]
    # monotone decrease in n, both against the clamped oracle and the closed form
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert all(b < a for a, b in zip(total, total[1:]))
    # halving n multiplies the error by at least two; this rule is second order (ratio ~4)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(2.0 <= r <= 5.0 for r in ratios), ratios


def test_discretize_rejects_bad_inputs():
    with pytest.raises(ValueError):
        lorentzian_discretize(LorentzianModel(0.0, 1.0), 2, 10.0)
    with pytest.raises(ValueError):
        lorentzian_discretize(LorentzianModel(0.0, 1.0), 100, 0.0)


# -- Wigner-Weisskopf ---------------------------------------------------------------

def test_ww_coefficient_is_n_independent():
    coeffs = []
    for n in (400, 1000, 2000):
        fam = wigner_weisskopf(WignerWeisskopfSpec(0.0, (-2.0, 2.0), n))
        ex = eta_extrapolation(fam, 1.0, default_eta_list(fam))
        coeffs.append(ex.gamma_limit)
    assert np.allclose(coeffs, math.pi, rtol=5e-3)


def test_ww_eta_sum_oracle():
    spec = WignerWeisskopfSpec(0.0, (-2.0, 2.0), 2000)
    fam = wigner_weisskopf(spec)
    e = spec.levels()
    v = spec.coupling_vector()
    for eta in (0.01, 0.05, 0.2):
        direct = np.sum(v**2 * eta / ((e - spec.E0) ** 2 + eta**2))
        assert abs(golden_rule_coefficient(fam, eta) - direct) <= 1e-12


def test_ww_coupling_vanishing_at_e0():
    spec = WignerWeisskopfSpec(0.0, (-2.0, 2.0), 2000, coupling=lambda e: e)
    fam = wigner_weisskopf(spec)
    assert spec.golden_rule_coefficient() == 0.0
    # continuum value int_{-2}^{2} E^2 eta / (E^2 + eta^2) dE = eta (4 - 2 eta arctan(2/eta)),
    # which vanishes linearly as eta -> 0
    for eta in default_eta_list(fam):
        c = golden_rule_coefficient(fam, eta)
        assert 0.0 <= c <= 4.0 * eta
        assert abs(c - eta * (4.0 - 2.0 * eta * math.atan(2.0 / eta))) <= 1e-3 * eta


def test_ww_spectrum_and_simplicity():
    spec = WignerWeisskopfSpec(0.1, (-2.0, 2.0), 400)
    fam = wigner_weisskopf(spec)
    expected = np.sort(np.concatenate([[0.1], spec.levels()]))
    assert np.allclose(fam.H0.eigenvalues, expected)
    assert np.sum(np.isclose(fam.H0.eigenvalues, 0.1, atol=1e-9)) == 1


def test_ww_rejects_bad_spec():
    with pytest.raises(ValueError):
        WignerWeisskopfSpec(3.0, (-2.0, 2.0), 400)
    with pytest.raises(ValueError):
        WignerWeisskopfSpec(0.0, (-2.0, 2.0), 100)
    with pytest.raises(ValueError):
        # E0 on a band level
        wigner_weisskopf(WignerWeisskopfSpec(-2.0 + 0.5 * 4.0 / 400, (-2.0, 2.0), 400))


def test_ww_models_pass_invariants():
    fam = wigner_weisskopf(WignerWeisskopfSpec(0.0, (-2.0, 2.0), 300))
    fam.H0.check_invariants()
    fam.hamiltonian(0.2).check_invariants()


# -- lattice operators -----------------------------------------------------------------

def test_free_chain_dispersion():
    L, t = 240, 0.8
    H, _ = tight_binding_defect(L, t, 0.0)
    k = np.arange(1, L + 1)
    expected = np.sort(2 * t * np.cos(np.pi * k / (L + 1)))
    assert np.max(np.abs(H.eigenvalues - expected)) <= 1e-10


def test_defect_bound_state():
    H, state = tight_binding_defect(301, 1.0, 3.0)
    H.check_invariants()
    E = H.expectation(state)
    # bound state above the band at sqrt(eps^2 + 4 t^2)
    assert abs(E - math.sqrt(9 + 4)) <= 1e-8
    assert np.linalg.norm(H.matvec(state) - E * state) <= 1e-8


def test_tight_binding_rejects_short_chain():
    with pytest.raises(ValueError):
        tight_binding_defect(100, 1.0, 1.0)


def test_free_schrodinger_matches_discrete_laplacian():
    n, length = 64, 10.0
    x = np.linspace(0, length, n, endpoint=False)
    dx = x[1] - x[0]
    H = schrodinger_1d(x, np.zeros(n))
    k = np.arange(n)
    expected = np.sort((1 - np.cos(2 * np.pi * k / n)) / dx**2)
    assert np.max(np.abs(H.eigenvalues - expected)) <= 1e-10


def test_dirichlet_schrodinger_spectrum():
    n = 50
    x = np.linspace(0.1, 5.0, n)
    dx = x[1] - x[0]
    H = schrodinger_1d(x, lambda y: np.zeros_like(y), boundary="dirichlet")
    k = np.arange(1, n + 1)
    expected = np.sort((1 - np.cos(np.pi * k / (n + 1))) / dx**2)
    assert np.max(np.abs(H.eigenvalues - expected)) <= 1e-9


def test_symmetric_potential_gives_parity_eigenvectors():
    n = 81
    x = np.linspace(-8, 8, n)
    H = schrodinger_1d(x, -np.exp(-x**2), boundary="dirichlet")
    for j in range(4):
        v = H.eigenvectors[:, j]
        assert min(np.linalg.norm(v - v[::-1]), np.linalg.norm(v + v[::-1])) <= 1e-8


def test_schrodinger_rejects_nonuniform_grid():
    with pytest.raises(ValueError):
        schrodinger_1d(np.array([0.0, 0.1, 0.3]), np.zeros(3))


def test_predissociation_model_structure():
    m = predissociation_model(n_levels=400, kappa=0.05)
    assert m.H1.dim == 5 and m.H2.dim == 400
    assert m.E0 == 0.0
    assert np.allclose(m.H1.matvec(m.psi0), 0.0)
