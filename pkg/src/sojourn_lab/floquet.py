"""Periodically driven systems through the quasi-energy (Floquet) operator.

For ``H(t) = H0 + kappa V(t)`` with period ``T = 2 pi / omega`` and
``V(t) = sum_n vhat(n) exp(i n omega t)`` the operator
``K = -i d/dt + H(t)`` acts on ``L^2(torus) x C^d``. In the harmonic basis
``h_n(t) = exp(i n omega t) / sqrt(T)`` it is the block matrix

    K[n, m] = delta_nm (H0 + n omega) + kappa vhat(n - m),

truncated to ``|n| <= N``. Block ``n = 0`` carries the physical state. The
frequency is kept explicit (``H0 + n omega``) throughout.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import expm_multiply

from .models import schrodinger_1d
from .sojourn import sojourn_truncated
from .spectral import HermitianOperator, ReducedResolvent, as_state, spectral_measure
from .width import best_lambda

STEPS_PER_PERIOD = 20
UNITARITY_DRIFT_PER_STEP = 1e-10
DENSE_EXPM_LIMIT = 2500


class UnderResolvedError(ValueError):
    pass


class NonResonanceError(ValueError):
    def __init__(self, eigenvalue: float, n: int):
        super().__init__(f"E0 + {n} omega hits the eigenvalue {eigenvalue!r} of H0")
        self.eigenvalue = eigenvalue
        self.n = n


class BoundaryContaminationError(RuntimeError):
    pass


@dataclass(eq=False)
class FloquetProblem:
    """``(H0, {vhat(n)}, omega, N, kappa)``.

    ``vhat`` maps harmonics to ``d x d`` matrices; missing negative
    harmonics are filled in as adjoints of the positive ones, and given
    pairs must satisfy ``vhat(-n) = vhat(n)^H``.
    """

    H0: HermitianOperator
    vhat: dict
    omega: float
    N: int
    kappa: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        d = self.H0.dim
        vh = {}
        for n, mat in self.vhat.items():
            mat = np.asarray(mat)
            if mat.shape != (d, d):
                raise ValueError(f"vhat({n}) has shape {mat.shape}, expected {(d, d)}")
            vh[int(n)] = mat
        for n in list(vh):
            if -n not in vh:
                vh[-n] = vh[n].conj().T
        for n, mat in vh.items():
            scale = max(1.0, float(np.max(np.abs(mat))))
            if np.max(np.abs(vh[-n] - mat.conj().T)) > 1e-12 * scale:
                raise ValueError(f"vhat({-n}) is not the adjoint of vhat({n})")
        self.vhat = {n: m for n, m in sorted(vh.items()) if np.any(m)}
        if self.N < self.M:
            raise ValueError(f"truncation N={self.N} is below the drive order M={self.M}")

    @property
    def d(self) -> int:
        return self.H0.dim

    @property
    def M(self) -> int:
        return max((abs(n) for n in self.vhat), default=0)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def dim(self) -> int:
        return (2 * self.N + 1) * self.d

    @property
    def is_real(self) -> bool:
        return self.H0.is_real and all(not np.iscomplexobj(m) for m in self.vhat.values())

    def replace(self, **changes) -> "FloquetProblem":
        return dataclasses.replace(self, **changes)

    def block(self, n: int) -> slice:
        if abs(n) > self.N:
            raise IndexError(f"harmonic {n} outside truncation N={self.N}")
        i = n + self.N
        return slice(i * self.d, (i + 1) * self.d)

    def embed(self, psi, n: int = 0) -> np.ndarray:
        """``h_n x psi`` as a vector of the truncated Floquet space."""
        psi = np.asarray(psi)
        out = np.zeros(self.dim, dtype=psi.dtype)
        out[self.block(n)] = psi
        return out

    def harmonics(self, vec) -> np.ndarray:
        """Reshape a Floquet vector to ``(2N + 1, d)``, row ``n + N`` = harmonic ``n``."""
        return np.asarray(vec).reshape(2 * self.N + 1, self.d)

    def drive(self, t: float) -> np.ndarray:
        """``V(t) = sum_n vhat(n) exp(i n omega t)`` (Hermitian)."""
        out = np.zeros((self.d, self.d), dtype=complex)
        for n, mat in self.vhat.items():
            out += mat * np.exp(1j * n * self.omega * t)
        return out.real if self.is_real else out

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.H0.entries + self.kappa * self.drive(t)


def default_truncation(vhat: dict, omega: float, kappa: float, ratio: float = 1e-3) -> int:
    """Smallest ``N`` with ``kappa max|vhat| / (omega (N - M)) < ratio``."""
    norms = [np.linalg.norm(np.asarray(m), 2) for n, m in vhat.items() if n != 0]
    M = max((abs(int(n)) for n, m in vhat.items() if np.any(m)), default=0)
    vmax = max(norms, default=0.0)
    if vmax == 0 or kappa == 0:
        return max(M, 1)
    return M + int(math.floor(abs(kappa) * vmax / (omega * ratio))) + 1


def _floquet_blocks(fp: FloquetProblem):
    d, N = fp.d, fp.N
    for n in range(-N, N + 1):
        yield n, n, fp.H0.entries + n * fp.omega * np.eye(d)
        for k, mat in fp.vhat.items():
            m = n - k
            if abs(m) <= N:
                yield n, m, fp.kappa * mat


def build_floquet(fp: FloquetProblem, *, diagonalize: bool = True) -> HermitianOperator:
    """Dense truncated Floquet operator of dimension ``(2N + 1) d``."""
    dtype = float if fp.is_real else complex
    K = np.zeros((fp.dim, fp.dim), dtype=dtype)
    for n, m, blk in _floquet_blocks(fp):
        K[fp.block(n), fp.block(m)] += blk
    return HermitianOperator(K, diagonalize=diagonalize)


def floquet_sparse(fp: FloquetProblem) -> scipy.sparse.csr_matrix:
    dtype = float if fp.is_real else complex
    rows = [[None] * (2 * fp.N + 1) for _ in range(2 * fp.N + 1)]
    for n, m, blk in _floquet_blocks(fp):
        i, j = n + fp.N, m + fp.N
        b = scipy.sparse.csr_matrix(blk.astype(dtype))
        rows[i][j] = b if rows[i][j] is None else rows[i][j] + b
    return scipy.sparse.bmat(rows, format="csr")


# --------------------------------------------------------------------------
# time-ordered propagation
# --------------------------------------------------------------------------

def _step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(H)
    return (vecs * np.exp(-1j * dt * vals)) @ vecs.conj().T


def _spectral_radius(H_of_t, times) -> float:
    return max(float(np.max(np.abs(np.linalg.eigvalsh(H_of_t(t))))) for t in times)


def _check_resolution(dt: float, omega: Optional[float], radius: float) -> None:
    shortest = math.inf
    if omega:
        shortest = 2.0 * math.pi / omega
    if radius > 0:
        shortest = min(shortest, 2.0 * math.pi / radius)
    if abs(dt) > shortest / STEPS_PER_PERIOD:
        raise UnderResolvedError(
            f"step {abs(dt):.3g} exceeds 1/{STEPS_PER_PERIOD} of the shortest period {shortest:.3g}")


@dataclass
class Propagator:
    times: np.ndarray
    unitaries: np.ndarray  # (len(times), d, d): U(times[i], times[0])
    max_unitarity_defect: float

    def __call__(self, i: int) -> np.ndarray:
        return self.unitaries[i]


def propagator(H_of_t: Callable[[float], np.ndarray], t0: float, t1: float, n_steps: int, *,
               omega: Optional[float] = None, record_every: int = 1) -> Propagator:
    """``U(t, t0)`` by midpoint-exponential steps ``exp(-i dt H(t + dt/2))``.

    The step must resolve both the drive period and the spectral radius
    (at least 20 steps per shortest period). Accumulated unitarity drift is
    checked every few steps and removed by polar projection when it exceeds
    ``1e-10`` per step.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    dt = (t1 - t0) / n_steps
    _check_resolution(dt, omega, _spectral_radius(H_of_t, (t0, 0.5 * (t0 + t1), t1)))
    d = np.asarray(H_of_t(t0)).shape[0]
    U = np.eye(d, dtype=complex)
    times, mats = [t0], [U.copy()]
    worst = 0.0
    since = 0
    for k in range(n_steps):
        t = t0 + k * dt
        U = _step_unitary(np.asarray(H_of_t(t + 0.5 * dt)), dt) @ U
        since += 1
        if since >= 32 or k == n_steps - 1:
            defect = float(np.linalg.norm(U.conj().T @ U - np.eye(d)))
            worst = max(worst, defect)
            if defect > UNITARITY_DRIFT_PER_STEP * since:
                U, _ = scipy.linalg.polar(U)
            since = 0
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            times.append(t0 + (k + 1) * dt)
            mats.append(U.copy())
    return Propagator(np.array(times), np.array(mats), worst)


class PeriodicStepper:
    """Cached one-period step unitaries for a ``T``-periodic Hamiltonian.

    Global step ``k`` maps ``t = k dt`` to ``(k + 1) dt`` with ``dt = T / m``.
    """

    def __init__(self, H_of_t, period: float, m: int, *, omega: Optional[float] = None):
        self.period = period
        self.m = int(m)
        self.dt = period / self.m
        _check_resolution(self.dt, omega or 2.0 * math.pi / period,
                          _spectral_radius(H_of_t, np.linspace(0, period, 5)))
        self._steps = [_step_unitary(np.asarray(H_of_t((j + 0.5) * self.dt)), self.dt)
                       for j in range(self.m)]
        self._adjoints = [u.conj().T.copy() for u in self._steps]

    def step(self, k: int) -> np.ndarray:
        return self._steps[k % self.m]

    def forward(self, X, k0: int, n: int):
        """Apply steps ``k0, ..., k0 + n - 1``; yields the state before each step and at the end."""
        for k in range(k0, k0 + n):
            yield X
            X = self.step(k) @ X
        yield X

    def backward(self, X, k0: int, n: int):
        """Propagate from ``k0 dt`` back to ``(k0 - n) dt``."""
        for k in range(k0 - 1, k0 - n - 1, -1):
            yield X
            X = self._adjoints[k % self.m] @ X
        yield X


def default_steps_per_period(fp: FloquetProblem, multiple: int = 1, oversample: int = 4) -> int:
    radius = _spectral_radius(fp.hamiltonian, np.linspace(0, fp.period, 5))
    shortest = min(fp.period, 2 * math.pi / radius if radius > 0 else math.inf)
    m = int(math.ceil(oversample * STEPS_PER_PERIOD * fp.period / shortest))
    return multiple * int(math.ceil(m / multiple))


# --------------------------------------------------------------------------
# Howland identity
# --------------------------------------------------------------------------

def _expm_apply(fp: FloquetProblem, vec: np.ndarray, s: float, K: Optional[HermitianOperator]) -> np.ndarray:
    if K is not None or fp.dim <= DENSE_EXPM_LIMIT:
        K = build_floquet(fp) if K is None else K
        vals, vecs = K.eig
        return vecs @ (np.exp(-1j * s * vals) * (vecs.conj().T @ vec))
    return expm_multiply(-1j * s * floquet_sparse(fp), vec.astype(complex))


def howland_check(fp: FloquetProblem, phi, s: float, *, n_t: int = 16,
                  steps_per_period: Optional[int] = None, margin: int = 1,
                  K: Optional[HermitianOperator] = None) -> float:
    """Max over a time grid of ``|(e^{-iKs} phi)(t + s) - U(t + s, t) phi(t)|``.

    ``phi`` is a Floquet vector (or ``(2N+1, d)`` array of harmonics) that
    must vanish outside ``|n| <= N - margin``. ``s`` must be a multiple of
    the propagation step; the default step count per period is chosen so
    that ``s = T`` and its integer multiples work.
    """
    coeffs = np.asarray(phi, dtype=complex).reshape(2 * fp.N + 1, fp.d)
    ns = np.arange(-fp.N, fp.N + 1)
    outside = np.abs(ns) > fp.N - margin
    if np.any(coeffs[outside]):
        raise ValueError(f"phi is not band limited to |n| <= N - {margin}")
    if s == 0:
        return 0.0
    m = steps_per_period or default_steps_per_period(fp, multiple=n_t)
    if m % n_t:
        raise ValueError("steps_per_period must be a multiple of n_t")
    stepper = PeriodicStepper(fp.hamiltonian, fp.period, m, omega=fp.omega)
    L = s / stepper.dt
    if abs(L - round(L)) > 1e-9 * max(1.0, L):
        raise ValueError("s must be a multiple of the propagation step")
    L = int(round(L))
    evolved = _expm_apply(fp, coeffs.ravel(), s, K).reshape(2 * fp.N + 1, fp.d)
    worst = 0.0
    for j in range(n_t):
        k0 = j * (m // n_t)
        t = k0 * stepper.dt
        phi_t = np.exp(1j * ns * fp.omega * t) @ coeffs
        *_, rhs = stepper.forward(phi_t, k0, L)
        lhs = np.exp(1j * ns * fp.omega * (t + s)) @ evolved
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


# --------------------------------------------------------------------------
# averaged sojourn time
# --------------------------------------------------------------------------

@dataclass
class AveragedSojourn:
    averaged: float
    averaged_half: float  # same average on every other initial time
    per_t0: np.ndarray
    floquet_sojourn: float
    delta_e_floquet: float
    lam_floquet: float
    horizon: float
    jensen_ok: bool
    bound_ok: bool
    infinite: bool = False


def averaged_sojourn(fp: FloquetProblem, psi, horizon: float, n_t0: int = 16, *,
                     steps_per_period: Optional[int] = None,
                     lam_interval: Optional[tuple[float, float]] = None,
                     E0: Optional[float] = None, rel_tol: float = 0.01) -> AveragedSojourn:
    """Initial-time average of the truncated sojourn of ``psi`` under ``H(t)``.

    All initial times lie on the propagation grid and are propagated
    together: with ``chi_j = U(0, t0_j) psi`` one has
    ``<psi, U(t, t0_j) psi> = <psi, U(t, 0) chi_j>``, so a single forward and
    a single backward sweep of the matrix ``[chi_j]`` serve every ``t0_j``.

    The Floquet side is the truncated sojourn of ``h_0 x psi`` with respect
    to ``K`` over the same horizon, and its width is minimized over
    ``lam_interval``. ``jensen_ok`` checks
    ``floquet_sojourn <= averaged (1 + rel_tol)``; ``bound_ok`` checks
    ``averaged >= (1 - 2 rel_tol) / delta_e_floquet``.
    """
    psi = as_state(psi)
    if E0 is None:
        E0 = fp.H0.expectation(psi)
    if fp.kappa == 0 or not fp.vhat:
        return AveragedSojourn(math.inf, math.inf, np.full(n_t0, math.inf), math.inf, 0.0,
                               float(E0), horizon, True, True, infinite=True)
    m = steps_per_period or default_steps_per_period(fp, multiple=n_t0)
    if m % n_t0:
        raise ValueError("steps_per_period must be a multiple of n_t0")
    stepper = PeriodicStepper(fp.hamiltonian, fp.period, m, omega=fp.omega)
    dt = stepper.dt
    L = int(math.ceil(horizon / dt))
    L += L % 2
    horizon = L * dt
    stride = m // n_t0
    starts = np.arange(n_t0) * stride

    chi = np.empty((fp.d, n_t0), dtype=complex)
    for j, k0 in enumerate(starts):
        *_, chi[:, j] = stepper.backward(psi.astype(complex), int(k0), int(k0))
    n_fwd = int(starts[-1]) + L
    fwd = np.array([psi.conj() @ X for X in stepper.forward(chi, 0, n_fwd)])
    bwd = np.array([psi.conj() @ X for X in stepper.backward(chi, 0, L)])

    per_t0 = np.empty(n_t0)
    s = np.arange(-L, L + 1)
    for j, k0 in enumerate(starts):
        idx = k0 + s
        amp = np.where(idx >= 0, fwd[np.clip(idx, 0, n_fwd), j], bwd[np.clip(-idx, 0, L), j])
        per_t0[j] = simpson(np.abs(amp) ** 2, dx=dt)
    averaged = float(per_t0.mean())
    averaged_half = float(per_t0[::2].mean())

    K = build_floquet(fp)
    mu = spectral_measure(K, fp.embed(psi))
    t_floquet = sojourn_truncated(mu, horizon).value
    if lam_interval is None:
        lam_interval = (E0 - 0.25 * fp.omega, E0 + 0.25 * fp.omega)
    lam, w = best_lambda(mu, lam_interval)
    lower = math.inf if w.delta_e == 0 else 1.0 / w.delta_e
    return AveragedSojourn(
        averaged=averaged,
        averaged_half=averaged_half,
        per_t0=per_t0,
        floquet_sojourn=t_floquet,
        delta_e_floquet=w.delta_e,
        lam_floquet=lam,
        horizon=horizon,
        jensen_ok=t_floquet <= averaged * (1.0 + rel_tol),
        bound_ok=averaged >= (1.0 - 2.0 * rel_tol) * lower,
    )


# --------------------------------------------------------------------------
# golden-rule width of the driven level
# --------------------------------------------------------------------------

def check_non_resonance(H0: HermitianOperator, E0: float, omega: float) -> None:
    """Raise :class:`NonResonanceError` if ``E0 + n omega`` (``n != 0``) is an eigenvalue of ``H0``."""
    vals = H0.eigenvalues
    tol = 1e-9 * H0.scale
    n_max = int(math.ceil((vals.max() - vals.min()) / omega)) + 1
    for n in range(-n_max, n_max + 1):
        if n == 0:
            continue
        gap = np.abs(vals - (E0 + n * omega))
        i = int(np.argmin(gap))
        if gap[i] <= tol:
            raise NonResonanceError(float(vals[i]), n)


def _full_resolvent_expectation(H0: HermitianOperator, v: np.ndarray, z: complex) -> complex:
    vals, vecs = H0.eig
    w = np.abs(vecs.conj().T @ v) ** 2
    return complex(np.sum(w / (vals - z)))


def floquet_fgr_terms(fp: FloquetProblem, psi, E0: float, eta: float) -> dict:
    """Per-sideband golden-rule contributions, keyed by ``m`` with the
    resolvent of ``H0`` evaluated at ``E0 + m omega + i eta``.

    The coupling into that sideband is ``vhat(-m) psi`` (block ``-m`` of the
    Floquet matrix); ``m = 0`` uses the reduced resolvent. Values include
    the ``kappa^2`` factor.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    psi = as_state(psi)
    check_non_resonance(fp.H0, E0, fp.omega)
    terms = {}
    for m in range(-fp.M, fp.M + 1):
        mat = fp.vhat.get(-m)
        if mat is None:
            terms[m] = 0.0
            continue
        v = mat @ psi
        z = complex(E0 + m * fp.omega, eta)
        if m == 0:
            val = ReducedResolvent(fp.H0, psi).expectation(v, z)
        else:
            val = _full_resolvent_expectation(fp.H0, v, z)
        terms[m] = fp.kappa ** 2 * float(val.imag)
    return terms


def floquet_fgr(fp: FloquetProblem, psi, E0: float, eta: float) -> float:
    """``kappa^2 sum_n Im <psi, vhat^*(n) R~(E0 + n omega + i eta) vhat(n) psi>``."""
    return float(sum(floquet_fgr_terms(fp, psi, E0, eta).values()))


def floquet_family(fp: FloquetProblem, psi, E0: float):
    """The Floquet operator as a :class:`~sojourn_lab.perturbation.PerturbedFamily`.

    ``H0 -> K0`` (drive off), ``V -> (K - K0) / kappa`` and ``psi -> h_0 x psi``.
    """
    from .perturbation import PerturbedFamily

    K0 = build_floquet(fp.replace(kappa=0.0))
    K1 = build_floquet(fp.replace(kappa=1.0), diagonalize=False)
    return PerturbedFamily(K0, K1.entries - K0.entries, fp.embed(as_state(psi)), E0)


# --------------------------------------------------------------------------
# AC Stark effect in one dimension
# --------------------------------------------------------------------------

@dataclass(eq=False)
class AcStarkScenario:
    problem: FloquetProblem
    psi: np.ndarray
    E0: float
    grid: np.ndarray
    w_samples: np.ndarray
    F: dict  # harmonic -> complex amplitude, F(t) = sum_n F_n exp(i n omega t)
    W: Optional[Callable] = None
    boundary: str = "periodic"

    @property
    def omega(self) -> float:
        return self.problem.omega

    @property
    def kappa(self) -> float:
        return self.problem.kappa

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def field(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = sum(Fn * np.exp(1j * n * self.omega * t) for n, Fn in self.F.items())
        return np.real(out)

    def q(self, t) -> np.ndarray:
        """Periodic excursion with ``q'' = F`` and zero mean."""
        t = np.asarray(t, dtype=float)
        out = sum(Fn / (1j * n * self.omega) ** 2 * np.exp(1j * n * self.omega * t)
                  for n, Fn in self.F.items())
        return np.real(out)

    def p(self, t) -> np.ndarray:
        """``q'``."""
        t = np.asarray(t, dtype=float)
        out = sum(Fn / (1j * n * self.omega) * np.exp(1j * n * self.omega * t)
                  for n, Fn in self.F.items())
        return np.real(out)

    def potential(self, shift: float) -> np.ndarray:
        """``W(x + shift)`` on the grid (exact for callable ``W``, else cubic spline)."""
        x = self.grid
        if self.W is not None:
            return np.asarray(self.W(x + shift), dtype=float)
        if self.boundary == "periodic":
            L = x.size * self.dx
            xs = np.append(x, x[0] + L)
            spline = CubicSpline(xs, np.append(self.w_samples, self.w_samples[0]), bc_type="periodic")
            return spline(x[0] + np.mod(x + shift - x[0], L))
        return CubicSpline(x, self.w_samples)(x + shift)

    def hamiltonian(self, t: float) -> np.ndarray:
        """Exact falling-frame ``-1/2 Laplacian + W(x + kappa q(t))`` (three-point stencil)."""
        kin = self.problem.H0.entries - np.diag(self.w_samples)
        return kin + np.diag(self.potential(self.kappa * float(self.q(t))))


def _central_difference(w: np.ndarray, dx: float, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return (np.roll(w, -1) - np.roll(w, 1)) / (2 * dx)
    return np.gradient(w, dx)


def ac_stark_scenario(W, F_coeffs: dict, omega: float, kappa: float, grid, *,
                      state_index: int = 0, boundary: str = "periodic",
                      N: Optional[int] = None) -> AcStarkScenario:
    """Bound state of ``-1/2 Laplacian + W`` in a homogeneous periodic field.

    ``F_coeffs`` maps harmonics ``n != 0`` to ``F_n``; negative harmonics
    default to the conjugates so that ``F(t)`` is real. The linearized drive
    has ``vhat(n) = F_n / (i n omega)^2 W'`` with ``W'`` by central
    differences.
    """
    x = np.asarray(grid, dtype=float)
    F = {int(n): complex(v) for n, v in F_coeffs.items()}
    if F.get(0, 0) != 0:
        raise ValueError("the field must have zero mean (F_0 = 0)")
    F.pop(0, None)
    for n in list(F):
        F.setdefault(-n, F[n].conjugate())
    for n in F:
        if abs(F[-n] - F[n].conjugate()) > 1e-14 * max(1.0, abs(F[n])):
            raise ValueError("F_{-n} must equal conj(F_n) for a real field")
    w = np.asarray(W(x) if callable(W) else W, dtype=float)
    H0 = schrodinger_1d(x, w, boundary=boundary)
    psi = H0.eigenvectors[:, state_index].copy()
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    E0 = float(H0.eigenvalues[state_index])
    dx = float(x[1] - x[0])
    dw = _central_difference(w, dx, boundary)
    vhat = {n: Fn / (1j * n * omega) ** 2 * np.diag(dw) for n, Fn in F.items()}
    vhat = {n: (m.real if not np.any(m.imag) else m) for n, m in vhat.items()}
    M = max((abs(n) for n in F), default=0)
    fp = FloquetProblem(H0, vhat, omega, N if N is not None else M + 2, kappa)
    sc = AcStarkScenario(fp, psi, E0, x, w, F, W if callable(W) else None, boundary)
    t = np.linspace(0, fp.period, 257)
    if kappa * float(np.max(np.abs(sc.q(t)))) > 5 * dx:
        raise ValueError("kappa * max|q| exceeds five grid spacings; the spline shift is unsafe")
    return sc


def eacs_width(sc: AcStarkScenario, eta: float, dW: Optional[Callable] = None) -> float:
    """Golden-rule width of the AC Stark resonance written with ``W'`` and ``F_n``:

    ``kappa^2 sum_n |F_n|^2 / (omega^4 n^4) Im <W' psi, R~(E0 + n omega + i eta) W' psi>``.

    ``dW`` (a callable) gives the exact derivative; otherwise central
    differences are used.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    check_non_resonance(sc.problem.H0, sc.E0, sc.omega)
    dw = dW(sc.grid) if dW is not None else _central_difference(sc.w_samples, sc.dx, sc.boundary)
    v = np.asarray(dw) * sc.psi
    total = 0.0
    for n, Fn in sc.F.items():
        z = complex(sc.E0 + n * sc.omega, eta)
        g = _full_resolvent_expectation(sc.problem.H0, v, z)
        total += abs(Fn) ** 2 / (sc.omega ** 4 * n ** 4) * g.imag
    return sc.kappa ** 2 * total


@dataclass
class GaugeCheck:
    residual: float
    leakage: float
    n_steps: int


def _phase_rate(sc: AcStarkScenario, t):
    """Rate of the scalar phase, taken verbatim:
    ``(q'p - p'q)/2 - (p^2/2 - kappa F q)`` for the scaled ``q, p``."""
    kq = sc.kappa * sc.q(t)
    kp = sc.kappa * sc.p(t)
    kF = sc.kappa * sc.field(t)
    return (kp * kp - kF * kq) / 2.0 - (kp * kp / 2.0 - kF * kq)


def gauge_equivalence_check(sc: AcStarkScenario, t0: float, t1: float, n_steps: int, *,
                            psi0=None, seam_fraction: float = 0.1,
                            leakage_tol: float = 1e-6) -> GaugeCheck:
    """Compare falling-frame and laboratory-frame evolutions through the
    phase-space translation ``S(t) = exp(-i(Q D - P x)) exp(i phi)``.

    Both frames are propagated with Strang splitting around the midpoint
    potential and the exact (Fourier) kinetic energy, so translations and
    boosts are exact on the grid up to spectral accuracy. ``Q = kappa q``,
    ``P = kappa q'``. Returns ``||S(t1) psi_fall(t1) - psi_lab(t1)||``.
    """
    if sc.boundary != "periodic":
        raise ValueError("the gauge check needs a periodic grid")
    x = sc.grid
    n = x.size
    dx = sc.dx
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    dt = (t1 - t0) / n_steps
    if abs(dt) > sc.problem.period / STEPS_PER_PERIOD:
        raise UnderResolvedError("time step does not resolve the drive period")
    if sc.W is None:
        w_hat = np.fft.fft(sc.w_samples)
        shifted_w = lambda shift: np.real(np.fft.ifft(w_hat * np.exp(1j * k * shift)))  # noqa: E731
    else:
        shifted_w = lambda shift: np.asarray(sc.W(x + shift), dtype=float)  # noqa: E731
    kin = np.exp(-0.5j * k * k * dt)
    kappa = sc.kappa

    def translate(psi, t, phase):
        Q = kappa * float(sc.q(t))
        P = kappa * float(sc.p(t))
        moved = np.fft.ifft(np.fft.fft(psi) * np.exp(-1j * k * Q))
        return np.exp(1j * (P * x - 0.5 * Q * P + phase)) * moved

    def strang(psi, pot):
        half = np.exp(-0.5j * dt * pot)
        return half * np.fft.ifft(kin * np.fft.fft(half * psi))

    psi = sc.psi if psi0 is None else np.asarray(psi0)
    psi = psi.astype(complex) / np.linalg.norm(psi)
    fall = psi.copy()
    lab = translate(psi, t0, 0.0)
    w0 = shifted_w(0.0)
    for j in range(n_steps):
        tm = t0 + (j + 0.5) * dt
        fall = strang(fall, shifted_w(kappa * float(sc.q(tm))))
        lab = strang(lab, w0 - kappa * float(sc.field(tm)) * x)

    tq = np.linspace(t0, t1, 2 * max(256, n_steps) + 1)
    phase = float(simpson(_phase_rate(sc, tq), x=tq))
    moved = translate(fall, t1, phase)

    centre = 0.5 * (x[0] + x[-1] + dx)
    span = n * dx
    edge = np.abs(x - centre) > (0.5 - seam_fraction) * span
    leakage = max(float(np.sum(np.abs(lab[edge]) ** 2)), float(np.sum(np.abs(moved[edge]) ** 2)))
    if leakage > leakage_tol:
        raise BoundaryContaminationError(f"norm {leakage:.2e} reached the periodic seam")
    return GaugeCheck(float(np.linalg.norm(moved - lab)), leakage, n_steps)


def gauge_convergence(sc: AcStarkScenario, t0: float, t1: float, steps: list) -> tuple[np.ndarray, float]:
    """Residuals for each step count and the fitted order in ``dt``."""
    res = np.array([gauge_equivalence_check(sc, t0, t1, n).residual for n in steps])
    dts = (t1 - t0) / np.asarray(steps, dtype=float)
    order = float(np.polyfit(np.log(dts), np.log(res), 1)[0])
    return res, order
