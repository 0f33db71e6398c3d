"""Dense Hermitian linear algebra: spectral measures and resolvent expectations.

Every operator in this package is a finite matrix. A :class:`HermitianOperator`
owns its eigendecomposition, a :class:`SpectralMeasure` is the point measure
``{(E_k, w_k)}`` of a normalized state with respect to such an operator, and
:class:`ReducedResolvent` evaluates resolvent expectations of the operator
compressed to the orthogonal complement of a single state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

HERMITICITY_RTOL = 1e-12
NORM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-10
MERGE_RTOL = 1e-9
SINGULAR_TOL = 1e-12

_CHUNK = 4_000_000  # max elements in a (times x energies) phase block


class SingularPointError(ValueError):
    """Raised when a resolvent is evaluated on (or numerically at) a pole."""


def _scale_of(a: np.ndarray) -> float:
    s = float(np.max(np.abs(a))) if a.size else 0.0
    return s if s > 0 else 1.0


def _maybe_real(a: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(a) and not np.any(a.imag):
        return np.ascontiguousarray(a.real)
    return a


class HermitianOperator:
    """Immutable dense self-adjoint matrix with a cached eigendecomposition.

    Real symmetric input is kept real so LAPACK uses the (much faster) real
    driver. The entries are symmetrized after the hermiticity check so that
    round-off in user assembly does not leak into the eigenvectors.

    Parameters
    ----------
    entries : array_like, shape (n, n)
    diagonalize : bool
        Compute the eigendecomposition now. With ``False`` it is computed on
        first access, which lets large Floquet matrices be used through
        matrix-vector products only.
    """

    def __init__(self, entries, *, diagonalize: bool = True):
        a = np.array(entries, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.number):
            raise TypeError("entries must be numeric")
        a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64)
        scale = _scale_of(a)
        asym = float(np.max(np.abs(a - a.conj().T)))
        if asym > HERMITICITY_RTOL * scale:
            raise ValueError(f"matrix is not Hermitian: max |A - A^H| = {asym:.3e}")
        a = _maybe_real(0.5 * (a + a.conj().T))
        a.setflags(write=False)
        self.entries = a
        self.scale = scale
        if diagonalize:
            self.eig  # noqa: B018

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.entries)

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_diagonal:
            d = np.real(np.diag(self.entries))
            order = np.argsort(d, kind="stable")
            vals = d[order]
            vecs = np.eye(self.dim)[:, order]
        else:
            vals, vecs = np.linalg.eigh(self.entries)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        return vals, vecs

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig[1]

    @cached_property
    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return not np.any(off)

    def matvec(self, v) -> np.ndarray:
        return self.entries @ np.asarray(v)

    def expectation(self, psi) -> float:
        psi = np.asarray(psi)
        return float(np.real(np.vdot(psi, self.entries @ psi)))

    def invariant_residuals(self) -> dict:
        """Hermiticity, reconstruction and orthonormality defects."""
        vals, vecs = self.eig
        n = self.dim
        recon = (vecs * vals) @ vecs.conj().T
        return {
            "hermiticity": float(np.max(np.abs(self.entries - self.entries.conj().T))),
            "reconstruction": float(np.linalg.norm(self.entries - recon)),
            "orthonormality": float(np.linalg.norm(vecs.conj().T @ vecs - np.eye(n))),
        }

    def check_invariants(self) -> None:
        r = self.invariant_residuals()
        n = self.dim
        if r["hermiticity"] > HERMITICITY_RTOL * self.scale:
            raise AssertionError(f"hermiticity defect {r['hermiticity']:.3e}")
        if r["reconstruction"] > 1e-10 * n * self.scale:
            raise AssertionError(f"reconstruction residual {r['reconstruction']:.3e}")
        if r["orthonormality"] > 1e-10 * n:
            raise AssertionError(f"eigenvectors not orthonormal: {r['orthonormality']:.3e}")

    def __repr__(self) -> str:
        kind = "real" if self.is_real else "complex"
        return f"HermitianOperator(dim={self.dim}, {kind})"


def as_state(vec, *, normalize: bool = False) -> np.ndarray:
    """Return ``vec`` as a 1-d array, checking (or enforcing) unit norm."""
    v = np.array(vec, dtype=np.result_type(np.asarray(vec).dtype, np.float64), copy=True)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("a state must be a nonempty 1-d vector")
    v = _maybe_real(v)
    nrm = float(np.linalg.norm(v))
    if normalize:
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return v / nrm
    if abs(nrm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized: |psi| = {nrm!r}")
    return v


def _check_dims(H: HermitianOperator, v: np.ndarray) -> None:
    if v.shape != (H.dim,):
        raise ValueError(f"dimension mismatch: operator {H.dim}, vector {v.shape}")


def _check_offaxis(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0:
        raise ValueError("resolvent argument must have nonzero imaginary part")
    return z


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Point spectral measure of a normalized state.

    ``energies`` are strictly ascending, ``weights`` nonnegative and summing
    to one. Besides the data it exposes the handful of transforms that the
    width and sojourn code consume, so that analytic models (see
    :class:`sojourn_lab.models.LorentzianModel`) can be used in their place.
    """

    energies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if e.shape != w.shape or e.size == 0:
            raise ValueError("energies and weights must be nonempty and of equal length")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly ascending")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        e.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, energies, weights, *, merge_tol: Optional[float] = None) -> "SpectralMeasure":
        """Sort, merge near-coincident energies and build a measure."""
        e = np.asarray(energies, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        order = np.argsort(e, kind="stable")
        e, w = e[order], w[order]
        if merge_tol is None:
            merge_tol = MERGE_RTOL * max(1.0, float(np.max(np.abs(e))))
        return cls(*_merge(e, w, merge_tol))

    @classmethod
    def point_mass(cls, energy: float) -> "SpectralMeasure":
        return cls(np.array([float(energy)]), np.array([1.0]))

    def __len__(self) -> int:
        return self.energies.size

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.weights.tolist()))

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.energies)))

    @property
    def spread(self) -> float:
        """Largest angular frequency present in ``|a(t)|**2``."""
        return float(self.energies[-1] - self.energies[0])

    @property
    def oscillation_bound(self) -> float:
        return self.spread

    envelope = None  # no exponential envelope is known for a point measure

    def mean(self) -> float:
        return float(self.weights @ self.energies)

    def point_weight(self, energy: float, tol: Optional[float] = None) -> float:
        if tol is None:
            tol = MERGE_RTOL * max(1.0, self.spectral_radius)
        return float(self.weights[np.abs(self.energies - energy) <= tol].sum())

    def resolvent(self, z) -> complex | np.ndarray:
        """``sum_k w_k / (E_k - z)``, vectorized over ``z``."""
        z = np.asarray(z, dtype=complex)
        if np.any(z.imag == 0):
            raise ValueError("resolvent argument must have nonzero imaginary part")
        out = (self.weights / (self.energies - z[..., None])).sum(axis=-1)
        return complex(out) if out.ndim == 0 else out

    def width_function(self, lam: float, eps) -> float | np.ndarray:
        eps_arr = np.asarray(eps, dtype=float)
        if np.any(eps_arr <= 0):
            raise ValueError("eps must be positive")
        e2 = eps_arr[..., None] ** 2
        d2 = (self.energies - lam) ** 2
        out = (self.weights * (2.0 * e2 / (d2 + e2))).sum(axis=-1)
        return float(out) if out.ndim == 0 else out

    def autocorrelation(self, t) -> complex | np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty(flat.size, dtype=complex)
        step = max(1, _CHUNK // max(1, self.energies.size))
        for i in range(0, flat.size, step):
            ph = np.exp(-1j * np.outer(flat[i:i + step], self.energies))
            out[i:i + step] = ph @ self.weights
        out = out.reshape(t.shape)
        return complex(out) if out.ndim == 0 else out

    def regularized_sojourn(self, eps: float) -> float:
        """``sum_jk w_j w_k 4 eps / ((E_j - E_k)^2 + 4 eps^2)``."""
        e, w = self.energies, self.weights
        four_eps = 4.0 * eps
        total = 0.0
        step = max(1, _CHUNK // max(1, e.size))
        for i in range(0, e.size, step):
            d = e[i:i + step, None] - e[None, :]
            total += float(w[i:i + step] @ (four_eps / (d * d + four_eps * eps)) @ w)
        return total

    def heisenberg_time(self, weight_floor: float = 1e-14) -> float:
        """``2 pi / (smallest gap between energies carrying weight)``."""
        e = self.energies[self.weights > weight_floor]
        if e.size < 2:
            return math.inf
        return 2.0 * math.pi / float(np.min(np.diff(e)))


def _merge(e: np.ndarray, w: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    if e.size == 0:
        return e, w
    breaks = np.flatnonzero(np.diff(e) > tol) + 1
    groups = np.split(np.arange(e.size), breaks)
    if len(groups) == e.size:
        return e, w
    out_e = np.empty(len(groups))
    out_w = np.empty(len(groups))
    for i, g in enumerate(groups):
        wg = w[g].sum()
        out_w[i] = wg
        out_e[i] = (w[g] @ e[g]) / wg if wg > 0 else e[g].mean()
    # weight averaging can collapse two groups onto (almost) the same value
    keep = np.concatenate([[True], np.diff(out_e) > 0])
    if not keep.all():
        return _merge(out_e, out_w, tol)
    return out_e, out_w


def spectral_measure(H: HermitianOperator, psi) -> SpectralMeasure:
    """Spectral measure of ``psi`` with respect to ``H``.

    Eigenvalues closer than ``1e-9 * scale`` are merged into a single point
    carrying the summed weight at the weight-averaged energy.
    """
    psi = np.asarray(psi)
    _check_dims(H, psi)
    vals, vecs = H.eig
    w = np.abs(vecs.conj().T @ psi) ** 2
    return SpectralMeasure.from_points(vals, w, merge_tol=MERGE_RTOL * H.scale)


def resolvent_expectation(mu: SpectralMeasure, z: complex) -> complex:
    """``<psi, (H - z)^{-1} psi>`` from the spectral measure of ``psi``."""
    return mu.resolvent(_check_offaxis(z))


def residual_norm(H: HermitianOperator, psi, lam: float) -> float:
    """``||(H - lam) psi||``."""
    psi = np.asarray(psi)
    _check_dims(H, psi)
    return float(np.linalg.norm(H.entries @ psi - lam * psi))


def measure_residual_norm(mu: SpectralMeasure, lam: float) -> float:
    """``(sum_k w_k (E_k - lam)^2)^{1/2}``; equals :func:`residual_norm`."""
    return float(np.sqrt(mu.weights @ (mu.energies - lam) ** 2))


class ReducedResolvent:
    """Resolvent of ``H`` compressed to the complement of one state.

    ``P = |p><p|`` and ``H_perp = P_perp H P_perp`` restricted to
    ``Ran P_perp``. The compression is materialized on the orthonormal basis
    given by the Householder reflector that maps ``p`` to a multiple of
    ``e_0``; the ``(n-1)``-dimensional block is then diagonalized once, and
    every later evaluation is a weighted sum over its spectrum.
    """

    def __init__(self, H: HermitianOperator, p_range):
        p = np.asarray(p_range)
        _check_dims(H, p)
        nrm = np.linalg.norm(p)
        if nrm == 0:
            raise ValueError("projection vector must be nonzero")
        p = p / nrm
        self.H = H
        self.p = p
        dtype = np.result_type(H.entries.dtype, p.dtype)
        # reflector R = I - beta u u^H with R p = alpha e_0
        p0 = p[0]
        phase = p0 / abs(p0) if abs(p0) > 0 else 1.0
        u = p.astype(dtype, copy=True)
        u[0] += phase  # alpha = -phase
        self._u = u
        self._beta = 2.0 / float(np.real(np.vdot(u, u)))
        A = H.entries.astype(dtype, copy=False)
        RA = A - self._beta * np.outer(u, u.conj() @ A)
        RAR = RA - self._beta * np.outer(RA @ u, u.conj())
        block = RAR[1:, 1:]
        block = _maybe_real(0.5 * (block + block.conj().T))
        if block.shape[0] == 0:
            self.energies = np.empty(0)
            self._vecs = np.empty((0, 0))
        elif not np.any(block - np.diag(np.diag(block))):
            self.energies = np.real(np.diag(block)).copy()
            self._vecs = None
        else:
            self.energies, self._vecs = np.linalg.eigh(block)
        self.scale = H.scale

    @property
    def dim(self) -> int:
        return self.energies.size

    def coordinates(self, v) -> np.ndarray:
        """Coordinates of ``P_perp v`` in the complement basis."""
        v = np.asarray(v)
        _check_dims(self.H, v)
        c = v - self._beta * self._u * np.vdot(self._u, v)
        return c[1:]

    def weights(self, v) -> np.ndarray:
        """Spectral weights ``|<phi_k, P_perp v>|^2`` on the eigenbasis of ``H_perp``."""
        c = self.coordinates(v)
        y = c if self._vecs is None else self._vecs.conj().T @ c
        return np.abs(y) ** 2

    def expectation(self, v, z, *, weights: Optional[np.ndarray] = None):
        """``<v, (H_perp - z)^{-1} v>``, vectorized over ``z``."""
        z = np.asarray(z, dtype=complex)
        w = self.weights(v) if weights is None else weights
        if self.dim == 0:
            return complex(0) if z.ndim == 0 else np.zeros(z.shape, complex)
        gap = np.min(np.abs(self.energies - z[..., None]), axis=-1)
        if np.any(gap <= SINGULAR_TOL * self.scale):
            raise SingularPointError(f"z is within {SINGULAR_TOL:g} of the spectrum of H_perp")
        out = (w / (self.energies - z[..., None])).sum(axis=-1)
        return complex(out) if out.ndim == 0 else out

    def local_spacing(self, energy: float, count: int = 10) -> float:
        """Median level spacing of ``H_perp`` among the levels nearest ``energy``."""
        if self.dim < 2:
            return math.inf
        idx = np.argsort(np.abs(self.energies - energy))[: max(2, count)]
        gaps = np.diff(np.sort(self.energies[idx]))
        gaps = gaps[gaps > 0]
        return float(np.median(gaps)) if gaps.size else 0.0

    @property
    def bandwidth(self) -> float:
        return float(self.energies.max() - self.energies.min()) if self.dim else 0.0


def reduced_resolvent_expectation(H: HermitianOperator, p_range, v, z: complex, *,
                                  method: str = "complement") -> complex:
    """``<v, (H_perp - z)^{-1} v>`` with ``H_perp`` the compression of ``H``
    to the orthogonal complement of ``p_range``.

    ``method="complement"`` materializes the compression explicitly (see
    :class:`ReducedResolvent`). ``method="bordered"`` is restricted to
    diagonal ``H`` and solves the bordered system
    ``[[H - z, p], [p^H, 0]] [x, m] = [P_perp v, 0]`` by block elimination
    in O(n); use it for very large diagonal realizations of a measure.
    """
    if method == "complement":
        return ReducedResolvent(H, p_range).expectation(v, z)
    if method == "bordered":
        if not H.is_diagonal:
            raise ValueError("the bordered method requires a diagonal operator")
        return bordered_reduced_expectation(np.real(np.diag(H.entries)), p_range, v, z)
    raise ValueError(f"unknown method {method!r}")


def bordered_reduced_expectation(diag, p_range, v, z: complex) -> complex:
    """Reduced resolvent expectation for ``H = diag(diag)`` by block elimination."""
    d = np.asarray(diag, dtype=float)
    p = np.asarray(p_range)
    p = p / np.linalg.norm(p)
    v = np.asarray(v)
    vp = v - p * np.vdot(p, v)
    r = d - complex(z)
    if np.min(np.abs(r)) <= SINGULAR_TOL * max(1.0, float(np.max(np.abs(d)))):
        raise SingularPointError("z coincides with a diagonal entry")
    # x = (H - z)^{-1} (vp + m p), with <p, x> = 0
    a = vp / r
    b = p / r
    m = -np.vdot(p, a) / np.vdot(p, b)
    x = a + m * b
    return complex(np.vdot(vp, x))
