"""Time scans, receiver-width searches and scaling fits.

Geometry convention for diagonal links: ``delta`` is the Euclidean distance
between transmitter and receiver centres, split into equal per-axis offsets
of ``round(delta / sqrt(n))`` sites.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import amplitude_damping_capacity
from .lattice import EffectiveHamiltonian, LatticeSpec, Region
from .propagation import KrylovEvolver, PropagatorConfig, make_evolver
from .states import StateVector, WavePacketSpec, make_wavepacket, pickup_probability

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TIME_RESOLUTION = 1e-3
UNREACHABLE = "UNREACHABLE"


def lattice_digest(lattice: LatticeSpec) -> str:
    blob = json.dumps({
        "extents": lattice.extents,
        "potentials": lattice.potentials,
        "absorber": None if lattice.absorbing_layer is None else asdict(lattice.absorbing_layer),
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally in a process pool; order preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- time scans --------------------------------------------------------------

@dataclass
class TimeScanResult:
    times: list[float]
    pickup: list[float]
    t_prop: float
    p_max: float
    capacity_at_max: float
    metadata: dict = field(default_factory=dict)


def default_time_grid(per_axis_offset: float, num: int = 101) -> np.ndarray:
    """``[0.8, 1.2] * offset / 2``: arrival window at the maximal group velocity 2."""
    t = per_axis_offset / 2.0
    return np.linspace(0.8 * t, 1.2 * t, num)


def _golden_max(f, a: float, b: float, tol: float):
    """Golden-section maximisation of ``f`` on ``[a, b]``; returns (x, f(x))."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def scan_propagation_time(lattice: LatticeSpec, initial: StateVector, receiver: Region,
                          t_grid: Sequence[float], refine: bool = True,
                          config: PropagatorConfig | None = None,
                          H: EffectiveHamiltonian | None = None,
                          resolution: float = TIME_RESOLUTION) -> TimeScanResult:
    """Pick-up probability in ``receiver`` along ``t_grid``, with optional refinement.

    The refined optimum (golden section down to ``resolution`` around the
    grid maximum) is merged into the returned series when it improves on the
    grid.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be non-empty and strictly increasing")
    if abs(initial.norm_sq() - 1.0) > 1e-9:
        raise ValueError("initial state must be normalised")
    receiver.validate(lattice)
    evolver = make_evolver(initial, config, H)
    krylov = isinstance(evolver, KrylovEvolver)

    pickup = np.empty(times.size)
    best = -1.0
    checkpoint = None  # (time, state) of the grid point preceding the best one
    previous = (times[0], None)
    for i, t in enumerate(times):
        state = evolver.at(float(t))
        pickup[i] = pickup_probability(state, receiver)
        if pickup[i] > best + 1e-12:
            best = pickup[i]
            checkpoint = previous
        previous = (float(t), state)
    i_best = int(np.flatnonzero(pickup >= best - 1e-12)[0])
    t_prop, p_max = float(times[i_best]), float(pickup[i_best])

    out_t, out_p = list(map(float, times)), list(map(float, pickup))
    if refine and times.size > 1:
        lo = float(times[max(i_best - 1, 0)])
        hi = float(times[min(i_best + 1, times.size - 1)])
        if krylov:
            t0, s0 = checkpoint if checkpoint[1] is not None else (lo, evolver.at(lo))
            local = KrylovEvolver(s0, evolver.H, evolver.config, t0=t0)
            lo = max(lo, t0)
            f = lambda t: pickup_probability(local.at(t), receiver)  # noqa: E731
        else:
            f = lambda t: pickup_probability(evolver.at(t), receiver)  # noqa: E731
        t_ref, p_ref = _golden_max(f, lo, hi, resolution)
        if p_ref > p_max + 1e-12:
            t_prop, p_max = float(t_ref), float(p_ref)
            k = int(np.searchsorted(times, t_ref))
            out_t.insert(k, t_prop)
            out_p.insert(k, p_max)

    return TimeScanResult(
        times=out_t, pickup=out_p, t_prop=t_prop, p_max=p_max,
        capacity_at_max=amplitude_damping_capacity(min(1.0, max(0.0, p_max))),
        metadata={"lattice": lattice_digest(lattice), "extents": list(lattice.extents),
                  "engine": "krylov" if krylov else "separable"},
    )


# --- diagonal links and receiver widths ----------------------------------------

def round_to_odd(x: float) -> int:
    """Nearest odd integer; exact even values round up."""
    x = round(float(x), 9)
    return max(1, 2 * math.floor(x / 2) + 1)


@dataclass(frozen=True)
class CubeRootRule:
    """Transmitter side ``round_to_odd(c * delta^(1/3))``."""

    c: float = 7.3

    def __call__(self, delta: float) -> int:
        return round_to_odd(self.c * delta ** (1.0 / 3.0))


@dataclass(frozen=True)
class DiagonalLink:
    """Transmitter and receiver placed along the lattice diagonal.

    ``extent`` fixes the lattice size per axis; by default it is chosen with
    enough head-room for the receiver search.
    """

    delta: float
    transmitter_side: int
    sigma: float | None = None
    dims: int = 2
    w_max: int = 201
    extent: int | None = None
    k0: float = math.pi / 2

    @property
    def offset(self) -> int:
        return int(round(self.delta / math.sqrt(self.dims)))

    @property
    def pad(self) -> int:
        return 16 + max(self.transmitter_side, self.w_max) // 2 + 2 * self.transmitter_side

    def resolved_extent(self) -> int:
        return self.extent if self.extent is not None else self.offset + 2 * self.pad + 1

    def fits(self, w: int | None = None) -> bool:
        w = self.w_max if w is None else w
        L = self.resolved_extent()
        lo = self.pad - self.transmitter_side // 2
        hi = self.pad + self.offset + w // 2
        return lo >= 0 and hi < L and self.pad - w // 2 >= 0

    def lattice(self) -> LatticeSpec:
        return LatticeSpec((self.resolved_extent(),) * self.dims)

    @property
    def transmitter_center(self) -> tuple[int, ...]:
        return (self.pad,) * self.dims

    @property
    def receiver_center(self) -> tuple[int, ...]:
        return (self.pad + self.offset,) * self.dims

    def initial_state(self) -> StateVector:
        lat = self.lattice()
        crop = Region.centered_box(self.transmitter_center, self.transmitter_side)
        spec = WavePacketSpec(tuple(float(c) for c in self.transmitter_center), crop,
                              self.sigma, (self.k0,) * self.dims)
        return make_wavepacket(lat, spec)

    def receiver(self, w: int) -> Region:
        return Region.centered_box(self.receiver_center, w)


@dataclass
class WidthSearchResult:
    delta: float
    target_p: float
    transmitter_side: int
    sigma: float
    w: int | None
    p_achieved: float
    t_prop: float
    probes: dict[int, float]
    monotone: bool

    @property
    def reachable(self) -> bool:
        return self.w is not None


def find_receiver_width(delta: float, target_p: float, transmitter_rule: Callable[[float], int] | None = None,
                        search_bounds: tuple[int, int] = (1, 201), sigma: float | None = None,
                        dims: int = 2, extent: int | None = None) -> WidthSearchResult:
    """Smallest odd receiver side whose max-over-time pick-up reaches ``target_p``.

    Exponential bracketing over odd widths, then bisection. An unreachable
    target yields ``w=None`` rather than an exception.
    """
    if not 0.0 < target_p < 1.0:
        raise ValueError("target_p must lie in (0, 1)")
    rule = transmitter_rule or CubeRootRule()
    side = int(rule(delta))
    w_lo_bound, w_hi_bound = search_bounds
    w_lo_bound = round_to_odd(w_lo_bound) if w_lo_bound % 2 == 0 else w_lo_bound
    w_hi_bound = w_hi_bound if w_hi_bound % 2 == 1 else w_hi_bound - 1
    link = DiagonalLink(delta, side, sigma, dims, w_max=w_hi_bound, extent=extent)
    sigma_used = link.sigma if link.sigma is not None else side / 4
    if not link.fits():
        return WidthSearchResult(delta, target_p, side, sigma_used, None, 0.0, float("nan"), {}, True)

    state = link.initial_state()
    grid = default_time_grid(link.offset)
    probes: dict[int, TimeScanResult] = {}

    def probe(w: int) -> float:
        if w not in probes:
            probes[w] = scan_propagation_time(state.lattice, state, link.receiver(w), grid)
        return probes[w].p_max

    hit = None
    miss = None
    w = w_lo_bound
    while True:
        if probe(w) >= target_p:
            hit = w
            break
        miss = w
        if w >= w_hi_bound:
            break
        w = min(2 * w + 1, w_hi_bound)
    if hit is not None and miss is not None:
        while hit - miss > 2:
            mid = miss + 2 * ((hit - miss) // 4)
            if probe(mid) >= target_p:
                hit = mid
            else:
                miss = mid

    ws = sorted(probes)
    monotone = all(probes[b].p_max >= probes[a].p_max - 1e-9 for a, b in zip(ws, ws[1:]))
    if not monotone:
        log.warning("pick-up not monotone in receiver width at delta=%s: %s", delta,
                    {k: probes[k].p_max for k in ws})
    pv = {k: probes[k].p_max for k in ws}
    if hit is None:
        best = probes[ws[-1]]
        return WidthSearchResult(delta, target_p, side, sigma_used, None, best.p_max, best.t_prop, pv, monotone)
    res = probes[hit]
    return WidthSearchResult(delta, target_p, side, sigma_used, hit, res.p_max, res.t_prop, pv, monotone)


# --- scaling experiment ---------------------------------------------------------

@dataclass(frozen=True)
class ScalingConfig:
    """Scaling-run knobs.

    With ``sigma_coeff`` set the packet width is ``sigma_coeff * delta^(1/3)``;
    otherwise each cell takes the best of ``sigma_factors`` times the
    transmitter side.
    """

    c: float = 7.3
    sigma_coeff: float | None = None
    sigma_factors: tuple[float, ...] = (0.25,)
    w_max: int = 201
    dims: int = 2
    extent: int | None = None


@dataclass
class ScalingRow:
    delta: float
    target_p: float
    w: int | None
    transmitter_side: int
    sigma: float
    p_achieved: float
    t_prop: float
    capacity: float
    monotone: bool

    @property
    def reachable(self) -> bool:
        return self.w is not None


@dataclass
class ScalingResult:
    rows: list[ScalingRow]
    fitted_slopes: dict[float, tuple[float, float, float]]
    warnings: list[str]
    config: ScalingConfig


def _scaling_cell(args) -> ScalingRow:
    delta, target, cfg = args
    rule = CubeRootRule(cfg.c)
    side = rule(delta)
    if cfg.sigma_coeff is not None:
        sigmas = [cfg.sigma_coeff * delta ** (1.0 / 3.0)]
    else:
        sigmas = [side * f for f in cfg.sigma_factors]
    best = None
    for sigma in sigmas:
        r = find_receiver_width(delta, target, rule, (1, cfg.w_max), sigma=sigma,
                                dims=cfg.dims, extent=cfg.extent)
        if not r.reachable:
            cand = (math.inf, -r.p_achieved)
        else:
            cand = (r.w, -r.p_achieved)
        if best is None or cand < best[0]:
            best = (cand, r)
    r = best[1]
    p = min(1.0, max(0.0, r.p_achieved))
    return ScalingRow(float(delta), float(target), r.w, side, float(r.sigma), float(r.p_achieved),
                      float(r.t_prop), amplitude_damping_capacity(p), r.monotone)


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log2 x, log2 y)``: (slope, intercept, max residual)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or np.any(pts <= 0):
        raise ValueError("points must be positive (x, y) pairs")
    lx, ly = np.log2(pts[:, 0]), np.log2(pts[:, 1])
    if np.unique(lx).size < 2:
        raise ValueError("need at least two distinct x values")
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), resid


def run_scaling_experiment(deltas: Sequence[float], target_ps: Sequence[float],
                           config: ScalingConfig | None = None, workers: int = 1) -> ScalingResult:
    """Receiver widths for every (delta, target) cell, then a slope per target."""
    if not deltas or not target_ps:
        raise ValueError("delta and target lists must be non-empty")
    cfg = config or ScalingConfig()
    cells = [(float(d), float(p), cfg) for p in sorted(target_ps) for d in sorted(deltas)]
    rows = run_ordered(_scaling_cell, cells, workers)
    warnings = []
    slopes = {}
    for p in sorted(set(float(x) for x in target_ps)):
        pts = [(r.delta, r.w) for r in rows if r.target_p == p and r.reachable]
        dropped = [r.delta for r in rows if r.target_p == p and not r.reachable]
        if dropped:
            warnings.append(f"target {p}: {UNREACHABLE} at delta {dropped}, excluded from fit")
        if len({d for d, _ in pts}) >= 2:
            slopes[p] = fit_loglog_slope(pts)
        else:
            warnings.append(f"target {p}: fewer than two reachable distances, no slope")
    for r in rows:
        if not r.monotone:
            warnings.append(f"non-monotone pick-up in width at delta {r.delta}, target {r.target_p}")
    return ScalingResult(rows, slopes, warnings, cfg)


def synthetic_scaling(deltas: Sequence[float] = (64, 128, 256, 512), exponent: float = 1 / 3,
                      prefactor: float = 1.0) -> dict[float, tuple[float, float, float]]:
    """Fit an exact power law ``w = prefactor * delta^exponent``; a self-test of the fit path."""
    return {0.0: fit_loglog_slope([(d, prefactor * d ** exponent) for d in deltas])}
