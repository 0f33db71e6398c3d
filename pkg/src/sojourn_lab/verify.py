"""Quick invariant suite behind ``sojourn-lab verify``.

Every check is deterministic for a given seed and small enough to run in
seconds. Each returns a :class:`Check`; :func:`run_suite` collects them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .floquet import FloquetProblem, build_floquet, propagator
from .models import LorentzianModel, lorentzian_width, wigner_weisskopf, WignerWeisskopfSpec
from .multistate import TwoChannelModel, as_family, ms_fgr
from .perturbation import fgr_width
from .sojourn import lemma_bound_check, sojourn_truncated
from .spectral import HermitianOperator, ReducedResolvent, spectral_measure
from .width import energy_width, etup_chain, feshbach_residual, fixed_point_residual


@dataclass
class Check:
    name: str
    ok: bool
    value: float
    limit: float

    def as_dict(self) -> dict:
        return asdict(self)


def random_hermitian(rng: np.random.Generator, n: int, *, real: bool = False) -> np.ndarray:
    a = rng.standard_normal((n, n))
    if not real:
        a = a + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def random_state(rng: np.random.Generator, n: int, *, real: bool = False) -> np.ndarray:
    v = rng.standard_normal(n)
    if not real:
        v = v + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def check_spectral_invariants(rng) -> Check:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 30))
        H = HermitianOperator(random_hermitian(rng, n))
        psi = random_state(rng, n)
        worst = max(worst, max(H.invariant_residuals().values()))
        mu = spectral_measure(H, psi)
        worst = max(worst, abs(mu.weights.sum() - 1.0))
    return Check("spectral invariants", worst <= 1e-10, worst, 1e-10)


def check_lorentzian(rng) -> Check:
    model = LorentzianModel(0.3, 0.7)
    worst = 0.0
    for lam in np.linspace(-2.0, 2.0, 21):
        w = energy_width(model, lam).delta_e
        worst = max(worst, abs(w - lorentzian_width(model, lam)) / model.Gamma)
    return Check("lorentzian width", worst <= 1e-8, worst, 1e-8)


def check_equality_case(rng) -> Check:
    eps = 0.25
    model = LorentzianModel(0.1, eps)
    rep = lemma_bound_check(model, 0.1, eps, 30.0 / eps)
    dev = abs(rep.ratio - 1.0)
    return Check("lemma equality case", dev <= 1e-6, dev, 1e-6)


def check_feshbach(rng) -> Check:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 25))
        H = HermitianOperator(random_hermitian(rng, n))
        psi = random_state(rng, n)
        red = ReducedResolvent(H, psi)
        for z in (complex(rng.uniform(-2, 2), rng.uniform(0.05, 2)),
                  complex(rng.uniform(-2, 2), -rng.uniform(0.05, 2))):
            worst = max(worst, feshbach_residual(H, psi, z, reduced=red) / H.scale)
    return Check("feshbach identity", worst <= 1e-9, worst, 1e-9)


def check_etup(rng) -> Check:
    worst = -math.inf
    for _ in range(40):
        n = int(rng.integers(2, 25))
        H = HermitianOperator(random_hermitian(rng, n))
        psi = random_state(rng, n)
        rep = etup_chain(H, psi, float(rng.uniform(-3, 3)))
        worst = max(worst, rep.delta_e - rep.residual)
    return Check("uncertainty chain", worst <= 1e-10, worst, 1e-10)


def check_fixed_point(rng) -> Check:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 25))
        H = HermitianOperator(random_hermitian(rng, n))
        psi = random_state(rng, n)
        lam = float(rng.uniform(-2, 2))
        w = energy_width(spectral_measure(H, psi), lam)
        if w.delta_e > 0:
            worst = max(worst, fixed_point_residual(H, psi, lam, w.delta_e))
    return Check("width fixed point", worst <= 1e-9, worst, 1e-9)


def check_herglotz(rng) -> Check:
    fam = wigner_weisskopf(WignerWeisskopfSpec(0.0, (-2.0, 2.0), 400))
    lowest = min(fgr_width(fam, 0.1, eta).gamma_fgr for eta in (0.03, 0.1, 0.3))
    return Check("golden-rule sign", lowest >= 0.0, lowest, 0.0)


def check_sojourn_bound(rng) -> Check:
    spec = WignerWeisskopfSpec(0.0, (-2.0, 2.0), 400)
    fam = wigner_weisskopf(spec)
    H = fam.hamiltonian(0.2)
    mu = spectral_measure(H, fam.psi)
    w = energy_width(mu, 0.0)
    t = sojourn_truncated(mu, 0.4 * mu.heisenberg_time()).value
    ratio = t * w.delta_e
    return Check("quasi-continuum sojourn bound", ratio >= 0.98, ratio, 0.98)


def check_floquet_free(rng) -> Check:
    H0 = HermitianOperator(np.diag([-0.4, 0.25, 1.1]))
    V1 = random_hermitian(rng, 3, real=True)
    fp = FloquetProblem(H0, {1: V1}, 0.9, 3, 0.0)
    K = build_floquet(fp)
    expected = np.sort((np.diag(H0.entries)[None, :] + 0.9 * np.arange(-3, 4)[:, None]).ravel())
    dev = float(np.max(np.abs(K.eigenvalues - expected)))
    return Check("floquet spectrum at zero drive", dev <= 1e-12, dev, 1e-12)


def check_propagator(rng) -> Check:
    A = random_hermitian(rng, 4)
    B = random_hermitian(rng, 4)
    omega = 1.7
    prop = propagator(lambda t: A + math.cos(omega * t) * B, 0.0, 10.0, 4000, omega=omega)
    U = prop.unitaries[-1]
    dev = float(np.linalg.norm(U.conj().T @ U - np.eye(4)))
    return Check("propagator unitarity", dev <= 1e-8, dev, 1e-8)


def check_multistate_identity(rng) -> Check:
    d1, d2 = 3, 300
    H1 = HermitianOperator(np.diag([-1.0, 0.0, 1.3]))
    H2 = HermitianOperator(np.diag(-2.0 + (np.arange(d2) + 0.5) * 4.0 / d2))
    V = rng.standard_normal((d1, d2)) * 0.1
    model = TwoChannelModel(H1, H2, V, 0.2, np.array([0.0, 1.0, 0.0]), 0.0)
    a = ms_fgr(model, 0.05)
    b = fgr_width(as_family(model), 0.2, 0.05).gamma_fgr
    dev = abs(a - b)
    return Check("multistate golden rule identity", dev <= 1e-10, dev, 1e-10)


CHECKS: list[Callable] = [
    check_spectral_invariants,
    check_lorentzian,
    check_equality_case,
    check_feshbach,
    check_etup,
    check_fixed_point,
    check_herglotz,
    check_sojourn_bound,
    check_floquet_free,
    check_propagator,
    check_multistate_identity,
]


def run_suite(seed: int = 0) -> list[Check]:
    out = []
    for fn in CHECKS:
        out.append(fn(np.random.default_rng(seed)))
    return out
