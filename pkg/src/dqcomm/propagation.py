"""Time evolution ``exp(-i H t)`` of single-excitation states.

Two engines:

* separable spectral: uniform lattices only. Each axis is diagonalised by
  the orthonormal type-I discrete sine transform, so PRODUCT states evolve
  at 1D cost and FULLGRID states by one transform per axis.
* Krylov: any lattice, including potentials and the non-Hermitian absorber.
  Arnoldi projection with a-posteriori step control.

Both engines return the exact propagator of the diagonal ``2 + 2 w_j``
convention, so their outputs are directly comparable (no phase bookkeeping).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

from .lattice import EffectiveHamiltonian, LatticeError, LatticeSpec, build_effective_hamiltonian
from .states import FULLGRID, PRODUCT, StateVector

SEPARABLE_SPECTRAL = "separable"
KRYLOV = "krylov"
AUTO = "auto"


class PropagationError(RuntimeError):
    """The propagator could not reach the requested accuracy."""


@dataclass(frozen=True)
class PropagatorConfig:
    method: str = AUTO
    krylov_dim: int = 30
    substep_tolerance: float = 1e-10
    max_substep: float | None = None
    max_substeps: int = 200_000

    def __post_init__(self):
        if self.method not in (AUTO, SEPARABLE_SPECTRAL, KRYLOV):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if self.krylov_dim < 4:
            raise ValueError("krylov_dim must be >= 4")
        if not self.substep_tolerance > 0:
            raise ValueError("substep_tolerance must be positive")
        if self.max_substep is not None and not self.max_substep > 0:
            raise ValueError("max_substep must be positive")


def group_velocity(k: float) -> float:
    """Group velocity ``d/dk (2 - 2 cos k)`` of the lattice dispersion."""
    if not 0.0 <= k <= math.pi:
        raise ValueError(f"k must lie in [0, pi], got {k}")
    return 2.0 * math.sin(k)


class Dispersion1D:
    """Eigen-system of the open chain ``2 - A`` of length ``L``.

    Energies ``2 - 2 cos(pi q / (L+1))`` ascending in ``q = 1..L``; the
    eigenvectors are the orthonormal sine modes.
    """

    def __init__(self, L: int):
        if L < 2:
            raise ValueError("chain length must be >= 2")
        self.L = int(L)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.pi * np.arange(1, self.L + 1) / (self.L + 1)

    @cached_property
    def hopping_eigenvalues(self) -> np.ndarray:
        """Eigenvalues ``-2 cos k_q`` of minus the chain adjacency matrix."""
        return -2.0 * np.cos(self.wavenumbers)

    @property
    def eigenvalues(self) -> np.ndarray:
        return 2.0 + self.hopping_eigenvalues

    def eigenvectors(self) -> np.ndarray:
        """Dense matrix whose column ``q-1`` is mode ``q``. Symmetric and orthogonal."""
        j = np.arange(1, self.L + 1)
        return math.sqrt(2.0 / (self.L + 1)) * np.sin(np.pi * np.outer(j, j) / (self.L + 1))

    @staticmethod
    def transform(x: np.ndarray, axis: int = -1) -> np.ndarray:
        """Project onto the sine modes along ``axis``. The transform is an involution."""
        return scipy.fft.dst(x, type=1, norm="ortho", axis=axis)


class SpectralEvolver:
    """Evolves one state on a uniform lattice to arbitrary times.

    The sine coefficients are computed once; each call to :meth:`at` costs a
    phase multiply and an inverse transform.
    """

    def __init__(self, state: StateVector):
        lat = state.lattice
        if not lat.is_uniform:
            raise LatticeError("separable evolution needs a lattice without potentials or absorber")
        self.state = state
        self._disp = [Dispersion1D(L) for L in lat.extents]
        if state.is_product:
            self._coeffs = tuple(Dispersion1D.transform(a) for a in state.amplitudes)
        else:
            c = np.asarray(state.amplitudes, dtype=complex)
            for axis in range(lat.dims):
                c = Dispersion1D.transform(c, axis=axis)
            self._coeffs = c

    def at(self, t: float) -> StateVector:
        lat = self.state.lattice
        if t == 0:
            return self.state
        if self.state.is_product:
            factors = []
            for axis, (d, c) in enumerate(zip(self._disp, self._coeffs)):
                phase = np.exp(-1j * t * d.hopping_eigenvalues)
                if axis == 0:
                    # on-site constant 2 is carried once, by the first factor
                    phase = phase * np.exp(-2j * t)
                factors.append(Dispersion1D.transform(c * phase))
            return StateVector(lat, PRODUCT, tuple(factors))
        c = self._coeffs * np.exp(-2j * t)
        for axis, d in enumerate(self._disp):
            shape = [1] * lat.dims
            shape[axis] = d.L
            c = c * np.exp(-1j * t * d.hopping_eigenvalues).reshape(shape)
        for axis in range(lat.dims):
            c = Dispersion1D.transform(c, axis=axis)
        return StateVector(lat, FULLGRID, np.ascontiguousarray(c))


def evolve_separable(state: StateVector, t: float, config: PropagatorConfig | None = None) -> StateVector:
    """``exp(-i H t) state`` on a uniform lattice via the sine eigenbasis."""
    return SpectralEvolver(state).at(t)


def _krylov_step(H: EffectiveHamiltonian, v: np.ndarray, tau: float, cfg: PropagatorConfig,
                 remaining: float):
    """One accepted Krylov substep from ``v``. Returns (new vector, step taken)."""
    n = v.size
    m = cfg.krylov_dim
    beta = np.linalg.norm(v)
    if beta == 0.0:
        return v.copy(), remaining
    V = np.empty((m + 1, n), dtype=complex)
    Hm = np.zeros((m + 1, m), dtype=complex)
    V[0] = v / beta
    breakdown = False
    k = m
    for j in range(m):
        w = H.matvec(V[j])
        # classical Gram-Schmidt, applied twice
        h = V[: j + 1].conj() @ w
        w -= h @ V[: j + 1]
        h2 = V[: j + 1].conj() @ w
        w -= h2 @ V[: j + 1]
        Hm[: j + 1, j] = h + h2
        hn = np.linalg.norm(w)
        Hm[j + 1, j] = hn
        if hn <= 1e-13 * (abs(Hm[j, j]) + 1.0):
            breakdown = True
            k = j + 1
            break
        V[j + 1] = w / hn
    Hk = Hm[:k, :k]
    tau = min(tau, remaining)
    while True:
        y = scipy.linalg.expm(-1j * tau * Hk)[:, 0]
        if breakdown:
            err = 0.0
        else:
            err = abs(Hm[k, k - 1] * y[k - 1])
        if err <= cfg.substep_tolerance:
            return beta * (y @ V[:k]), tau
        tau *= 0.5
        if tau < 1e-14 * max(remaining, 1.0):
            raise PropagationError("Krylov step size underflow")


class KrylovEvolver:
    """Marches one state forward in time on a general lattice.

    :meth:`at` accepts non-decreasing times and reuses the previous result;
    an earlier time restarts from the initial state.
    """

    def __init__(self, state: StateVector, H: EffectiveHamiltonian | None = None,
                 config: PropagatorConfig | None = None, t0: float = 0.0):
        self.config = config or PropagatorConfig(method=KRYLOV)
        self.H = H if H is not None else build_effective_hamiltonian(state.lattice, krylov_dim=self.config.krylov_dim)
        if H is not None and H.lattice.extents != state.lattice.extents:
            raise LatticeError("Hamiltonian and state live on different lattices")
        self.lattice = state.lattice
        self._v0 = np.ascontiguousarray(state.grid(), dtype=complex).reshape(-1)
        self._t0 = float(t0)
        self._v = self._v0.copy()
        self._t = self._t0
        self.substeps = 0
        d = self.H.diagonal
        hnorm = float(np.max(np.abs(d))) + 2.0 * self.lattice.dims
        self._tau = 0.5 * self.config.krylov_dim / hnorm

    @property
    def time(self) -> float:
        return self._t

    def at(self, t: float) -> StateVector:
        if t < self._t0:
            raise ValueError(f"cannot evolve backwards past t0={self._t0}")
        if t < self._t:
            self._v = self._v0.copy()
            self._t = self._t0
        cfg = self.config
        while t - self._t > 1e-15 * max(1.0, abs(t)):
            remaining = t - self._t
            tau = self._tau if cfg.max_substep is None else min(self._tau, cfg.max_substep)
            self._v, taken = _krylov_step(self.H, self._v, tau, cfg, remaining)
            self._t += taken
            self.substeps += 1
            if self.substeps > cfg.max_substeps:
                raise PropagationError(f"exceeded {cfg.max_substeps} Krylov substeps")
            if taken < remaining:
                # full proposal accepted: try a slightly longer step next time
                self._tau = taken * 1.25 if taken >= tau * (1 - 1e-12) else taken
        self._t = t
        return StateVector(self.lattice, FULLGRID, self._v.reshape(self.lattice.extents).copy())


def evolve_krylov(state: StateVector, t: float, H: EffectiveHamiltonian | None = None,
                  config: PropagatorConfig | None = None) -> StateVector:
    """``exp(-i H t) state`` by adaptive Arnoldi substepping. Requires ``t >= 0``."""
    if t < 0:
        raise ValueError("evolve_krylov needs t >= 0")
    return KrylovEvolver(state, H, config).at(t)


def resolve_method(lattice: LatticeSpec, config: PropagatorConfig | None) -> str:
    method = (config or PropagatorConfig()).method
    if method == AUTO:
        return SEPARABLE_SPECTRAL if lattice.is_uniform else KRYLOV
    if method == SEPARABLE_SPECTRAL and not lattice.is_uniform:
        raise LatticeError("separable engine selected for a lattice with potentials or absorber")
    return method


def make_evolver(state: StateVector, config: PropagatorConfig | None = None,
                 H: EffectiveHamiltonian | None = None):
    """Evolver object with an ``at(t)`` method, picked per ``config.method``."""
    if resolve_method(state.lattice, config) == SEPARABLE_SPECTRAL:
        return SpectralEvolver(state)
    return KrylovEvolver(state, H, config)


def evolve(state: StateVector, t: float, config: PropagatorConfig | None = None,
           H: EffectiveHamiltonian | None = None) -> StateVector:
    return make_evolver(state, config, H).at(t)
