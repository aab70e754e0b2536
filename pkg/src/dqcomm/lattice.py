"""Lattice geometry, regions, antenna barriers and the single-excitation Hamiltonian.

Sites are indexed row-major over their integer coordinates. In the
one-excitation sector of the XY model with on-site fields ``w_j sigma^z_j``
the dynamics reduce to a particle hopping with amplitude -1 between nearest
neighbours, on top of a diagonal ``2 + 2 w_j`` (sector constants dropped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels

DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3  # bytes


class LatticeError(ValueError):
    """Invalid lattice, region or antenna specification."""


@dataclass(frozen=True)
class AbsorbingLayer:
    width: int
    strength: float

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1:
            raise LatticeError(f"absorbing layer width must be a positive integer, got {self.width}")
        if not self.strength > 0:
            raise LatticeError(f"absorbing layer strength must be positive, got {self.strength}")


@dataclass(frozen=True)
class LatticeSpec:
    """Open hypercubic lattice with optional on-site potentials and absorber.

    ``potentials`` maps flat site index to the field strength ``w_j`` (units of
    the coupling). It is stored as a sorted tuple of pairs so the object stays
    hashable and immutable.
    """

    extents: tuple[int, ...]
    potentials: tuple[tuple[int, float], ...] = ()
    absorbing_layer: AbsorbingLayer | None = None

    def __init__(self, extents: Sequence[int], potentials: Mapping[int, float] | Iterable[tuple[int, float]] = (),
                 absorbing_layer: AbsorbingLayer | None = None):
        extents = tuple(int(e) for e in extents)
        if not extents:
            raise LatticeError("lattice needs at least one dimension")
        if any(e < 2 for e in extents):
            raise LatticeError(f"every extent must be >= 2, got {extents}")
        n_sites = math.prod(extents)
        items = potentials.items() if isinstance(potentials, Mapping) else potentials
        merged: dict[int, float] = {}
        for k, w in items:
            k = int(k)
            if not 0 <= k < n_sites:
                raise LatticeError(f"potential site {k} outside lattice of {n_sites} sites")
            merged[k] = merged.get(k, 0.0) + float(w)
        if absorbing_layer is not None and not absorbing_layer.width < min(extents) / 2:
            raise LatticeError("absorbing layer must be thinner than half the smallest extent")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "potentials", tuple(sorted(merged.items())))
        object.__setattr__(self, "absorbing_layer", absorbing_layer)

    @property
    def dims(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return math.prod(self.extents)

    @property
    def is_uniform(self) -> bool:
        """True when the lattice has no potentials and no absorber."""
        return self.absorbing_layer is None and not any(w != 0.0 for _, w in self.potentials)

    def potential_map(self) -> dict[int, float]:
        return dict(self.potentials)

    def potential_array(self) -> np.ndarray:
        w = np.zeros(self.n_sites)
        for k, v in self.potentials:
            w[k] = v
        return w.reshape(self.extents)

    def site_index(self, coords: Sequence[int]) -> int:
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.dims or any(not 0 <= c < e for c, e in zip(coords, self.extents)):
            raise LatticeError(f"coordinates {coords} outside extents {self.extents}")
        return int(np.ravel_multi_index(coords, self.extents))

    def site_coords(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.n_sites:
            raise LatticeError(f"site {index} outside lattice of {self.n_sites} sites")
        return tuple(int(c) for c in np.unravel_index(index, self.extents))

    def with_potentials(self, potentials: Mapping[int, float]) -> "LatticeSpec":
        return LatticeSpec(self.extents, potentials, self.absorbing_layer)

    def without_extras(self) -> "LatticeSpec":
        return LatticeSpec(self.extents)


@dataclass(frozen=True)
class Region:
    """Axis-aligned box (``origin``/``size``) or an explicit set of site indices."""

    origin: tuple[int, ...] | None = None
    size: tuple[int, ...] | None = None
    sites: frozenset[int] | None = None

    @classmethod
    def box(cls, origin: Sequence[int], size: Sequence[int]) -> "Region":
        size = tuple(int(s) for s in size)
        if any(s < 1 for s in size):
            raise LatticeError(f"box size must be positive, got {size}")
        return cls(origin=tuple(int(o) for o in origin), size=size)

    @classmethod
    def centered_box(cls, center: Sequence[int], side: int | Sequence[int]) -> "Region":
        """Box of odd side length(s) centred on an integer site."""
        center = tuple(int(c) for c in center)
        sides = (int(side),) * len(center) if np.isscalar(side) else tuple(int(s) for s in side)
        return cls.box([c - s // 2 for c, s in zip(center, sides)], sides)

    @classmethod
    def mask(cls, sites: Iterable[int]) -> "Region":
        return cls(sites=frozenset(int(s) for s in sites))

    @property
    def is_box(self) -> bool:
        return self.sites is None

    def validate(self, lattice: LatticeSpec) -> None:
        if self.is_box:
            if self.origin is None or self.size is None:
                raise LatticeError("box region needs an origin and a size")
            if len(self.origin) != lattice.dims or len(self.size) != lattice.dims:
                raise LatticeError("region dimension does not match the lattice")
            for o, s, e in zip(self.origin, self.size, lattice.extents):
                if o < 0 or o + s > e:
                    raise LatticeError(f"box {self.origin}+{self.size} leaves extents {lattice.extents}")
        else:
            bad = [s for s in self.sites if not 0 <= s < lattice.n_sites]
            if bad:
                raise LatticeError(f"mask sites {sorted(bad)[:5]} outside the lattice")

    def bounds(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Half-open per-axis bounds of a box region."""
        hi = tuple(o + s for o, s in zip(self.origin, self.size))
        return self.origin, hi

    def center(self) -> tuple[float, ...]:
        return tuple(o + (s - 1) / 2 for o, s in zip(self.origin, self.size))


def enumerate_region(lattice: LatticeSpec, region: Region) -> list[int]:
    """Site indices of ``region`` in lexicographic coordinate order."""
    region.validate(lattice)
    if not region.is_box:
        return sorted(region.sites)
    axes = [np.arange(o, o + s) for o, s in zip(region.origin, region.size)]
    grids = np.meshgrid(*axes, indexing="ij")
    flat = np.ravel_multi_index(tuple(g.ravel() for g in grids), lattice.extents)
    return [int(i) for i in flat]


def region_mask(lattice: LatticeSpec, region: Region) -> np.ndarray:
    """Boolean array of lattice shape that is True on the region."""
    region.validate(lattice)
    m = np.zeros(lattice.extents, dtype=bool)
    if region.is_box:
        lo, hi = region.bounds()
        m[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
    else:
        m.reshape(-1)[sorted(region.sites)] = True
    return m


@dataclass(frozen=True)
class AntennaGeometry:
    """Set of barrier sites with one uniform strength."""

    sites: frozenset[int] = field(default_factory=frozenset)
    strength: float = 0.0

    def __init__(self, sites: Iterable[int] = (), strength: float = 0.0):
        object.__setattr__(self, "sites", frozenset(int(s) for s in sites))
        object.__setattr__(self, "strength", float(strength))


def v_antenna(lattice: LatticeSpec, apex: Sequence[int], arm_length: int, strength: float,
              opening: Sequence[int] = (1, 1), thickness: int = 1) -> AntennaGeometry:
    """V-shaped barrier: two arms at right angles meeting at ``apex``.

    The arms run along the two lattice axes in the directions given by the
    signs of ``opening``, so the V opens along that diagonal. ``thickness``
    extends each arm away from the opening.
    """
    if lattice.dims != 2:
        raise LatticeError("v_antenna is defined for 2D lattices")
    if arm_length < 1 or thickness < 1:
        raise LatticeError("arm_length and thickness must be positive")
    sx, sy = (1 if o >= 0 else -1 for o in opening)
    ax, ay = (int(a) for a in apex)
    sites = set()
    for s in range(arm_length + thickness):
        for d in range(thickness):
            # arm along x sits below/behind the opening in y, and vice versa
            for cx, cy in ((ax + sx * (s - thickness + 1), ay - sy * d),
                           (ax - sx * d, ay + sy * (s - thickness + 1))):
                sites.add(lattice.site_index((cx, cy)))
    return AntennaGeometry(sites, strength)


def make_antenna_barrier(lattice: LatticeSpec, geometry: AntennaGeometry) -> LatticeSpec:
    """Copy of ``lattice`` with the antenna strength added at every antenna site."""
    bad = [s for s in geometry.sites if not 0 <= s < lattice.n_sites]
    if bad:
        raise LatticeError(f"antenna sites {sorted(bad)[:5]} outside the lattice")
    pots = lattice.potential_map()
    for s in geometry.sites:
        pots[s] = pots.get(s, 0.0) + geometry.strength
    return LatticeSpec(lattice.extents, pots, lattice.absorbing_layer)


def absorber_ramp(lattice: LatticeSpec) -> np.ndarray:
    """Quadratic ramp, 0 at the inner edge of the absorbing layer and 1 at the wall."""
    ramp = np.zeros(lattice.extents)
    layer = lattice.absorbing_layer
    if layer is None:
        return ramp
    W = layer.width
    for axis, L in enumerate(lattice.extents):
        x = np.arange(L)
        dist = np.minimum(x, L - 1 - x)
        r = np.where(dist < W, ((W - dist) / W) ** 2, 0.0)
        shape = [1] * lattice.dims
        shape[axis] = L
        ramp = np.maximum(ramp, r.reshape(shape))
    return ramp


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Single-particle operator: diagonal ``d`` plus hopping -1 on every edge."""

    lattice: LatticeSpec
    diagonal: np.ndarray  # lattice shape; complex when an absorber is present

    @property
    def hermitian(self) -> bool:
        return self.lattice.absorbing_layer is None

    @property
    def shape(self) -> tuple[int, int]:
        n = self.lattice.n_sites
        return (n, n)

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Apply to a state of lattice shape (flat vectors are accepted too)."""
        flat = x.ndim == 1 and self.lattice.dims != 1
        xs = np.ascontiguousarray(x.reshape(self.lattice.extents) if flat else x)
        y = _kernels.stencil_matvec(self.diagonal, xs, out)
        return y.reshape(-1) if flat else y

    def to_sparse(self) -> sp.csr_matrix:
        hop = None
        for axis, L in enumerate(self.lattice.extents):
            chain = sp.diags([-np.ones(L - 1), -np.ones(L - 1)], [-1, 1])
            term = sp.identity(1, format="csr")
            for a, La in enumerate(self.lattice.extents):
                term = sp.kron(term, chain if a == axis else sp.identity(La), format="csr")
            hop = term if hop is None else hop + term
        return (hop + sp.diags(self.diagonal.reshape(-1))).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def build_effective_hamiltonian(lattice: LatticeSpec, *, krylov_dim: int = 30,
                                memory_budget: int = DEFAULT_MEMORY_BUDGET) -> EffectiveHamiltonian:
    """Single-excitation restriction of the XY Hamiltonian plus on-site fields.

    ``memory_budget`` (bytes) bounds the working set of a Krylov propagation on
    this lattice, roughly ``(krylov_dim + 4)`` complex vectors.
    """
    need = lattice.n_sites * 16 * (krylov_dim + 4)
    if need > memory_budget:
        raise LatticeError(f"lattice of {lattice.n_sites} sites needs ~{need} bytes, budget is {memory_budget}")
    d = 2.0 + 2.0 * lattice.potential_array()
    if lattice.absorbing_layer is not None:
        d = d - 1j * lattice.absorbing_layer.strength * absorber_ramp(lattice)
    d = np.ascontiguousarray(d)
    d.setflags(write=False)
    return EffectiveHamiltonian(lattice, d)
