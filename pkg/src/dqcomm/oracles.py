"""Independent reference computations.

Nothing here goes through the production code paths it is used to check:
the spin Hamiltonian is built from Pauli matrices on the full 2^N space,
propagators come from dense ``expm`` or Bessel functions, and capacities
from brute-force grids.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
import scipy.linalg
import scipy.special

# local basis (|down>, |up>) = (|0>, |1>); spin up is the excitation
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def _site_op(op, j, n):
    return reduce(np.kron, [op if k == j else ID2 for k in range(n)])


def lattice_edges(extents):
    """Nearest-neighbour pairs of an open grid, as flat row-major indices."""
    idx = np.arange(math.prod(extents)).reshape(extents)
    edges = []
    for axis in range(len(extents)):
        a = np.moveaxis(idx, axis, 0)
        for x, y in zip(a[:-1].ravel(), a[1:].ravel()):
            edges.append((int(x), int(y)))
    return edges


def full_spin_hamiltonian(extents, fields=None):
    """XY model ``-1/2 sum (XX + YY) + sum (Z + 1) + sum w_j Z`` on 2^N states."""
    n = math.prod(extents)
    fields = np.zeros(n) if fields is None else np.asarray(fields, dtype=float)
    dim = 2 ** n
    H = np.zeros((dim, dim), dtype=complex)
    for j, k in lattice_edges(extents):
        H += -0.5 * (_site_op(SX, j, n) @ _site_op(SX, k, n) + _site_op(SY, j, n) @ _site_op(SY, k, n))
    for j in range(n):
        H += _site_op(SZ, j, n) + np.eye(dim) + fields[j] * _site_op(SZ, j, n)
    return H


def one_excitation_block(H, n):
    """Restriction of a 2^N operator to states with exactly one spin up.

    Row/column ``j`` is the state with site ``j`` excited (site 0 is the most
    significant qubit in the Kronecker ordering).
    """
    basis = [1 << (n - 1 - j) for j in range(n)]
    return H[np.ix_(basis, basis)]


def remove_identity_shift(A, B):
    """Best constant ``c`` with ``A ~ B + c I`` and the residual max-abs entry."""
    c = np.trace(A - B).real / A.shape[0]
    return c, float(np.max(np.abs(A - B - c * np.eye(A.shape[0]))))


def dense_propagator(H, t):
    return scipy.linalg.expm(-1j * t * np.asarray(H))


def bessel_amplitude(d, t):
    """Infinite-chain amplitude ``i^d J_d(2t)`` of ``exp(i A t)``."""
    d = np.asarray(d)
    return (1j ** d) * scipy.special.jv(d, 2.0 * t)


def open_chain_spectrum(L):
    q = np.arange(1, L + 1)
    return 2.0 - 2.0 * np.cos(np.pi * q / (L + 1))


def _h2(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.nan_to_num(v)


def ad_capacity_grid(p, step=1e-6):
    """Amplitude damping capacity by exhaustive search over the input population."""
    if p <= 0.5:
        return 0.0
    tau = np.arange(0.0, 1.0 + step / 2, step)
    return float(max(0.0, np.max(_h2(p * tau) - _h2((1 - p) * tau))))


def displayed_multiparticle_channel(rho, p, q, spectrum):
    """Output of the multi-particle channel written term by term.

    Basis ``(e0, e1, f_1..f_k)`` with sigma diagonal in the ``f`` basis.
    """
    k = len(spectrum)
    d = 2 + k
    r = max(0.0, 1.0 - p - q)
    out = np.zeros((d, d), dtype=complex)
    out[0, 0] += rho[0, 0]
    out[1, 1] += p * rho[1, 1]
    out[1, 0] += math.sqrt(p) * rho[1, 0]
    out[0, 1] += math.sqrt(p) * rho[0, 1]
    out[0, 0] += q * rho[1, 1]
    for i, s in enumerate(spectrum):
        out[2 + i, 2 + i] += r * rho[1, 1] * s
    return out


def run_oracle_suites():
    """Quick cross-checks of the production code against these oracles."""
    from .channels import amplitude_damping_capacity
    from .lattice import LatticeSpec, build_effective_hamiltonian
    from .propagation import evolve_krylov, evolve_separable
    from .states import inject_delta

    results = []
    rng = np.random.default_rng(12345)
    worst = 0.0
    for extents in [(2,), (3,), (4,), (2, 2)]:
        n = math.prod(extents)
        w = rng.uniform(-2, 2, n)
        lat = LatticeSpec(extents, dict(enumerate(w)))
        A = build_effective_hamiltonian(lat).to_dense()
        B = one_excitation_block(full_spin_hamiltonian(extents, w), n)
        worst = max(worst, remove_identity_shift(A, B)[1])
    results.append(("sector restriction", worst < 1e-12, f"max deviation {worst:.2e}"))

    L, t = 1024, 10.0
    s = evolve_separable(inject_delta(LatticeSpec((L,)), L // 2), t)
    d = np.arange(-40, 41)
    amp = s.amplitudes[0][L // 2 + d] * np.exp(2j * t)
    err = float(np.max(np.abs(amp - bessel_amplitude(d, t))))
    results.append(("bessel propagation", err < 1e-8, f"max deviation {err:.2e}"))

    lat = LatticeSpec((12,), {4: 3.0})
    H = build_effective_hamiltonian(lat)
    v = inject_delta(lat, 0)
    err = float(np.max(np.abs(evolve_krylov(v, 6.0, H).grid() - dense_propagator(H.to_dense(), 6.0)[:, 0])))
    results.append(("krylov vs dense expm", err < 1e-9, f"max deviation {err:.2e}"))

    err = abs(amplitude_damping_capacity(0.75) - ad_capacity_grid(0.75))
    results.append(("amplitude damping capacity", err < 1e-8, f"|Q - grid| = {err:.2e}"))
    return results
