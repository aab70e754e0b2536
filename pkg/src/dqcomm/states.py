"""Single-excitation states: preparation, pick-up probabilities and dumps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .lattice import LatticeError, LatticeSpec, Region, region_mask

PRODUCT = "product"
FULLGRID = "fullgrid"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes of one excitation on a lattice.

    ``PRODUCT`` states hold one 1D array per axis and the site amplitude is
    their outer product. ``FULLGRID`` states hold a single array of lattice
    shape.
    """

    lattice: LatticeSpec
    representation: str
    amplitudes: tuple[np.ndarray, ...] | np.ndarray

    def __post_init__(self):
        if self.representation == PRODUCT:
            if not self.lattice.is_uniform:
                raise LatticeError("PRODUCT states need a lattice without potentials or absorber")
            if len(self.amplitudes) != self.lattice.dims:
                raise LatticeError("PRODUCT state needs one factor per axis")
            for a, L in zip(self.amplitudes, self.lattice.extents):
                if a.shape != (L,):
                    raise LatticeError(f"factor of shape {a.shape} does not match extent {L}")
        elif self.representation == FULLGRID:
            if self.amplitudes.shape != self.lattice.extents:
                raise LatticeError(f"grid of shape {self.amplitudes.shape} does not match {self.lattice.extents}")
        else:
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def is_product(self) -> bool:
        return self.representation == PRODUCT

    def norm_sq(self) -> float:
        if self.is_product:
            return math.prod(float(np.vdot(a, a).real) for a in self.amplitudes)
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_fullgrid(self) -> "StateVector":
        if not self.is_product:
            return self
        return StateVector(self.lattice, FULLGRID, _outer(self.amplitudes))

    def grid(self) -> np.ndarray:
        return self.to_fullgrid().amplitudes

    def scaled(self, factor: complex) -> "StateVector":
        if self.is_product:
            first = self.amplitudes[0] * factor
            return StateVector(self.lattice, PRODUCT, (first,) + tuple(self.amplitudes[1:]))
        return StateVector(self.lattice, FULLGRID, self.amplitudes * factor)


def _outer(factors) -> np.ndarray:
    grid = factors[0]
    for a in factors[1:]:
        grid = np.multiply.outer(grid, a)
    return np.ascontiguousarray(grid, dtype=complex)


@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian envelope ``exp(-(x-c)^2 / (4 sigma^2))`` times ``exp(i k0 . x)``.

    ``sigma=None`` selects a quarter of the crop side on each axis.
    """

    center: tuple[float, ...]
    crop: Region
    sigma: float | None = None
    k0: tuple[float, ...] | None = None

    def resolved_sigma(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if not self.crop.is_box:
            raise LatticeError("default sigma needs a box crop")
        return min(self.crop.size) / 4

    def resolved_k0(self) -> tuple[float, ...]:
        if self.k0 is not None:
            return tuple(float(k) for k in self.k0)
        return (math.pi / 2,) * len(self.center)


def _axis_factor(L, lo, hi, center, sigma, k0):
    x = np.arange(L, dtype=float)
    a = np.zeros(L, dtype=complex)
    xs = x[lo:hi]
    a[lo:hi] = np.exp(-((xs - center) ** 2) / (4 * sigma ** 2) + 1j * k0 * xs)
    return a


def make_wavepacket(lattice: LatticeSpec, spec: WavePacketSpec, representation: str | None = None) -> StateVector:
    """Modulated Gaussian cropped to ``spec.crop`` and normalised after cropping.

    Box crops on uniform lattices default to the PRODUCT representation.
    """
    spec.crop.validate(lattice)
    sigma = spec.resolved_sigma()
    k0 = spec.resolved_k0()
    if not sigma > 0:
        raise LatticeError("wave packet width must be positive")
    if len(spec.center) != lattice.dims or len(k0) != lattice.dims:
        raise LatticeError("wave packet center/momentum dimension does not match the lattice")
    if representation is None:
        representation = PRODUCT if (spec.crop.is_box and lattice.is_uniform) else FULLGRID
    if spec.crop.is_box:
        lo, hi = spec.crop.bounds()
        factors = [_axis_factor(L, a, b, c, sigma, k)
                   for L, a, b, c, k in zip(lattice.extents, lo, hi, spec.center, k0)]
        norms = [np.linalg.norm(f) for f in factors]
        if math.prod(norms) < 1e-150 or not all(n > 0 for n in norms):
            raise LatticeError("cropped wave packet has zero amplitude")
        factors = tuple(f / n for f, n in zip(factors, norms))
        if representation == PRODUCT:
            return StateVector(lattice, PRODUCT, factors)
        return StateVector(lattice, FULLGRID, _outer(factors))
    if representation == PRODUCT:
        raise LatticeError("PRODUCT states need a box crop")
    mask = region_mask(lattice, spec.crop)
    coords = np.indices(lattice.extents, dtype=float)
    expo = np.zeros(lattice.extents, dtype=complex)
    for axis in range(lattice.dims):
        expo += -((coords[axis] - spec.center[axis]) ** 2) / (4 * sigma ** 2) + 1j * k0[axis] * coords[axis]
    grid = np.where(mask, np.exp(expo), 0.0)
    nrm = np.linalg.norm(grid)
    if not nrm > 1e-150:
        raise LatticeError("cropped wave packet has zero amplitude")
    return StateVector(lattice, FULLGRID, np.ascontiguousarray(grid / nrm))


def inject_delta(lattice: LatticeSpec, site: int | Sequence[int], representation: str | None = None) -> StateVector:
    """Excitation localised on one site (flat index or coordinates)."""
    coords = lattice.site_coords(site) if np.isscalar(site) else tuple(int(c) for c in site)
    lattice.site_index(coords)  # bounds check
    if representation is None:
        representation = PRODUCT if lattice.is_uniform else FULLGRID
    if representation == PRODUCT:
        factors = []
        for c, L in zip(coords, lattice.extents):
            a = np.zeros(L, dtype=complex)
            a[c] = 1.0
            factors.append(a)
        return StateVector(lattice, PRODUCT, tuple(factors))
    grid = np.zeros(lattice.extents, dtype=complex)
    grid[coords] = 1.0
    return StateVector(lattice, FULLGRID, grid)


def pickup_probability(state: StateVector, region: Region) -> float:
    """Probability weight of ``state`` inside ``region``."""
    region.validate(state.lattice)
    if region.is_box:
        lo, hi = region.bounds()
        if state.is_product:
            return math.prod(float(np.sum(np.abs(a[l:h]) ** 2)) for a, l, h in zip(state.amplitudes, lo, hi))
        return _kernels.box_weight(state.amplitudes, lo, hi)
    grid = state.grid().reshape(-1)
    idx = np.fromiter(sorted(region.sites), dtype=np.int64)
    v = grid[idx]
    return float(np.sum(v.real ** 2 + v.imag ** 2))


# --- debugging dumps -------------------------------------------------------
#
# CSV: header ``site,real,imag`` then one row per site in flat index order.
# Binary: magic b"DQCS", little-endian int64 ndim, int64 extents[ndim], then
# complex128 amplitudes in flat index order.

_MAGIC = b"DQCS"


def dump_state(state: StateVector, path: str | Path, fmt: str = "csv") -> None:
    flat = state.grid().reshape(-1)
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site", "real", "imag"])
            for i, a in enumerate(flat):
                w.writerow([i, repr(float(a.real)), repr(float(a.imag))])
    elif fmt == "bin":
        ext = np.asarray(state.lattice.extents, dtype="<i8")
        with path.open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(np.asarray([len(ext)], dtype="<i8").tobytes())
            fh.write(ext.tobytes())
            fh.write(flat.astype("<c16").tobytes())
    else:
        raise ValueError(f"unknown state dump format {fmt!r}")


def load_state(path: str | Path, lattice: LatticeSpec, fmt: str = "csv") -> StateVector:
    path = Path(path)
    if fmt == "csv":
        flat = np.zeros(lattice.n_sites, dtype=complex)
        with path.open(newline="") as fh:
            r = csv.reader(fh)
            if next(r) != ["site", "real", "imag"]:
                raise ValueError("state CSV must start with header site,real,imag")
            for row in r:
                flat[int(row[0])] = complex(float(row[1]), float(row[2]))
    elif fmt == "bin":
        raw = path.read_bytes()
        if raw[:4] != _MAGIC:
            raise ValueError("not a state dump")
        ndim = int(np.frombuffer(raw[4:12], dtype="<i8")[0])
        ext = tuple(int(e) for e in np.frombuffer(raw[12:12 + 8 * ndim], dtype="<i8"))
        if ext != lattice.extents:
            raise LatticeError(f"dump extents {ext} differ from lattice {lattice.extents}")
        flat = np.frombuffer(raw[12 + 8 * ndim:], dtype="<c16").astype(complex)
    else:
        raise ValueError(f"unknown state dump format {fmt!r}")
    return StateVector(lattice, FULLGRID, flat.reshape(lattice.extents).copy())
