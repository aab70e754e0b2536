"""Channel capacities from pick-up probabilities.

Single excitations give the qubit amplitude damping channel, whose quantum
capacity has a closed single-letter form. The multi-particle channel is
checked numerically through its Stinespring dilation and the coherent
information ``S(B) - S(E)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

POSITIVE = "POSITIVE"
NONPOSITIVE = "NONPOSITIVE"
POSITIVITY_TOL = 1e-9
_EIG_FLOOR = 1e-14


class ChannelError(ValueError):
    """Parameters outside the probability simplex or malformed states."""


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit with bias ``x``, in bits."""
    if not 0.0 <= x <= 1.0:
        raise ChannelError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class AmplitudeDampingParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ChannelError(f"pick-up probability must lie in [0, 1], got {self.p}")


def _ad_objective(p: float, tau: float) -> float:
    return binary_entropy(p * tau) - binary_entropy((1.0 - p) * tau)


def amplitude_damping_capacity(params: AmplitudeDampingParams | float) -> float:
    """Quantum capacity of the amplitude damping channel with survival ``p``.

    Zero for ``p <= 1/2``; otherwise ``max_tau h(p tau) - h((1-p) tau)``.
    """
    if not isinstance(params, AmplitudeDampingParams):
        params = AmplitudeDampingParams(float(params))
    p = params.p
    if p <= 0.5:
        return 0.0
    if p == 1.0:
        return 1.0
    res = minimize_scalar(lambda tau: -_ad_objective(p, tau), bounds=(0.0, 1.0),
                          method="bounded", options={"xatol": 1e-10})
    return max(0.0, float(-res.fun))


@dataclass(frozen=True)
class MultiParticleChannelParams:
    """``p`` all particles in the receiver, ``q`` none, ``r = 1 - p - q`` split."""

    p: float
    q: float
    sigma_spectrum: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q > 1 + 1e-12:
            raise ChannelError(f"(p, q) = ({self.p}, {self.q}) outside the probability simplex")
        if self.sigma_spectrum is not None:
            s = tuple(float(x) for x in self.sigma_spectrum)
            if not s or any(x <= 0 for x in s) or abs(sum(s) - 1.0) > 1e-12:
                raise ChannelError("sigma spectrum must be positive and sum to 1")
            object.__setattr__(self, "sigma_spectrum", s)

    @property
    def r(self) -> float:
        return max(0.0, 1.0 - self.p - self.q)

    def spectrum(self) -> tuple[float, ...]:
        return self.sigma_spectrum if self.sigma_spectrum is not None else (1.0,)


@dataclass(frozen=True, eq=False)
class ChannelDilation:
    """Isometry ``V: C^2 -> B (x) E`` stored as a ``(d_B * d_E, 2)`` matrix."""

    V: np.ndarray
    d_out: int
    d_env: int

    @property
    def d_in(self) -> int:
        return self.V.shape[1]

    def joint(self, rho: np.ndarray) -> np.ndarray:
        return self.V @ rho @ self.V.conj().T

    def output(self, rho: np.ndarray) -> np.ndarray:
        """Channel output, environment traced out."""
        J = self.joint(rho).reshape(self.d_out, self.d_env, self.d_out, self.d_env)
        return np.einsum("aebe->ab", J)

    def environment(self, rho: np.ndarray) -> np.ndarray:
        """Complementary channel output, receiver traced out."""
        J = self.joint(rho).reshape(self.d_out, self.d_env, self.d_out, self.d_env)
        return np.einsum("aeaf->ef", J)


def build_multiparticle_dilation(params: MultiParticleChannelParams) -> ChannelDilation:
    """Stinespring isometry of the multi-particle channel.

    Output basis ``e0`` (empty receiver), ``e1`` (all particles), then one
    ``f_i`` per eigenvalue of sigma. Environment basis ``eps0`` (nothing
    left behind), ``eps1`` (everything left behind), ``eps_{1+i}``.
    """
    spec = params.spectrum()
    k = len(spec)
    d = 2 + k
    V = np.zeros((d, d, 2), dtype=complex)
    V[0, 0, 0] = 1.0
    V[1, 0, 1] = math.sqrt(params.p)
    V[0, 1, 1] = math.sqrt(params.q)
    r = params.r
    for i, s in enumerate(spec):
        V[2 + i, 2 + i, 1] = math.sqrt(r * s)
    V = V.reshape(d * d, 2)
    # renormalise the |1> column against rounding in r = 1 - p - q
    V[:, 1] /= np.linalg.norm(V[:, 1])
    return ChannelDilation(V, d, d)


def amplitude_damping_dilation(p: float) -> ChannelDilation:
    """Two-qubit dilation of the amplitude damping channel, independent of the above."""
    AmplitudeDampingParams(p)
    V = np.zeros((4, 2), dtype=complex)
    V[0, 0] = 1.0                      # |0> -> |0>_B |0>_E
    V[2, 1] = math.sqrt(p)             # |1> -> sqrt(p) |1>_B |0>_E
    V[1, 1] = math.sqrt(1.0 - p)       #      + sqrt(1-p) |0>_B |1>_E
    return ChannelDilation(V, 2, 2)


def validate_density_matrix(rho: np.ndarray, dim: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ChannelError("density matrix must be square")
    if dim is not None and rho.shape[0] != dim:
        raise ChannelError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ChannelError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise ChannelError("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
        raise ChannelError("density matrix is not positive semidefinite")
    return rho


def von_neumann_entropy(rho: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(rho)
    ev = ev[ev > _EIG_FLOOR]
    return float(-np.sum(ev * np.log2(ev)))


def coherent_information(dilation: ChannelDilation, rho: np.ndarray) -> float:
    """``S(Phi(rho)) - S(Phi_c(rho))`` in bits."""
    rho = validate_density_matrix(rho, dilation.d_in)
    return von_neumann_entropy(dilation.output(rho)) - von_neumann_entropy(dilation.environment(rho))


def _batched_entropy(mats: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvalsh(mats)
    safe = np.where(ev > _EIG_FLOOR, ev, 1.0)
    return -np.sum(np.where(ev > _EIG_FLOOR, ev * np.log2(safe), 0.0), axis=-1)


def coherent_information_batch(dilation: ChannelDilation, rhos: np.ndarray) -> np.ndarray:
    """Coherent information for a stack of valid input states ``(n, 2, 2)``."""
    V = dilation.V
    J = np.einsum("ia,nab,jb->nij", V, rhos, V.conj())
    J = J.reshape(-1, dilation.d_out, dilation.d_env, dilation.d_out, dilation.d_env)
    out = np.einsum("naebe->nab", J)
    env = np.einsum("naeaf->nef", J)
    return _batched_entropy(out) - _batched_entropy(env)


def default_tau_grid() -> np.ndarray:
    """Excited-population grid: uniform on [0, 1] plus a log-spaced tail near 0."""
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, 1001), np.geomspace(1e-9, 1e-3, 61)]))


def _diag_states(tau: np.ndarray, coherence: float = 0.0) -> np.ndarray:
    rhos = np.zeros((tau.size, 2, 2), dtype=complex)
    rhos[:, 0, 0] = 1.0 - tau
    rhos[:, 1, 1] = tau
    c = coherence * np.sqrt(tau * (1.0 - tau))
    rhos[:, 0, 1] = c
    rhos[:, 1, 0] = c
    return rhos


def max_coherent_information(dilation: ChannelDilation, tau_grid: np.ndarray | None = None,
                             coherences: Sequence[float] = (0.25, 0.5, 0.75, 1.0)) -> dict:
    """Maximise over diagonal inputs, then scan real coherences as a guard.

    The channels are phase covariant, so coherent inputs are not expected to
    beat the diagonal optimum; ``coherence_gain`` reports how much they did.
    """
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    vals = coherent_information_batch(dilation, _diag_states(tau))
    i = int(np.argmax(vals))
    best_diag = float(vals[i])
    gain = 0.0
    if coherences:
        cvals = coherent_information_batch(dilation, np.concatenate(
            [_diag_states(tau, c) for c in coherences]))
        gain = max(0.0, float(np.max(cvals)) - best_diag)
    return {"max_ic": best_diag + gain, "tau": float(tau[i]), "diag_max_ic": best_diag, "coherence_gain": gain}


@dataclass(frozen=True)
class ThresholdRow:
    p: float
    q: float
    r: float
    rank: int
    max_ic: float
    verdict: str
    violation: bool
    coherence_gain: float


def _threshold_row(params: MultiParticleChannelParams, tau_grid: np.ndarray) -> ThresholdRow:
    res = max_coherent_information(build_multiparticle_dilation(params), tau_grid)
    verdict = POSITIVE if res["max_ic"] > POSITIVITY_TOL else NONPOSITIVE
    expected = POSITIVE if params.p > params.q else NONPOSITIVE
    return ThresholdRow(params.p, params.q, params.r, len(params.spectrum()), res["max_ic"],
                        verdict, verdict != expected, res["coherence_gain"])


def simplex_grid(n: int, spectra: Iterable[tuple[float, ...]] = ((1.0,), (0.5, 0.5))) -> list[MultiParticleChannelParams]:
    """All ``(p, q) = (i/n, j/n)`` with ``i + j <= n``, once per sigma spectrum."""
    if n < 1:
        raise ChannelError("grid resolution must be >= 1")
    spectra = [tuple(s) for s in spectra]
    out = []
    for spec in spectra:
        for i in range(n + 1):
            for j in range(n + 1 - i):
                out.append(MultiParticleChannelParams(i / n, j / n, spec))
    return out


def verify_multiparticle_threshold(grid: Iterable[MultiParticleChannelParams],
                                   tau_grid: np.ndarray | None = None) -> dict:
    """Check ``max I_c > 0`` exactly when ``p > q`` at every grid point."""
    tau = default_tau_grid() if tau_grid is None else tau_grid
    rows = [_threshold_row(g, tau) for g in grid]
    return {
        "rows": rows,
        "violations": sum(r.violation for r in rows),
        "n_points": len(rows),
        "max_coherence_gain": max((r.coherence_gain for r in rows), default=0.0),
    }
