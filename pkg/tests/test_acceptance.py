"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Under pytest the lines are repeated in the terminal summary; run
``python3 tests/test_acceptance.py`` for the report alone.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from dqcomm import cli
from dqcomm import config as cfgmod
from dqcomm.channels import amplitude_damping_capacity, simplex_grid, verify_multiparticle_threshold
from dqcomm.lattice import LatticeSpec, Region, build_effective_hamiltonian
from dqcomm.oracles import bessel_amplitude, full_spin_hamiltonian, one_excitation_block, remove_identity_shift
from dqcomm.propagation import PropagatorConfig, evolve_krylov, evolve_separable
from dqcomm.states import FULLGRID, WavePacketSpec, inject_delta, make_wavepacket

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
_cache: dict = {}
REPORT: list[str] = []


def _report(n, title, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} | {detail} | {elapsed:.2f}s (budget {budget:g}s)"
    REPORT.append(line)
    print(line, flush=True)
    return ok, line


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def _doc(name, command):
    return cfgmod.resolve(cfgmod.load_document(CONFIGS / name), command)


# --- 1 ------------------------------------------------------------------------

def criterion_1():
    def run():
        rng = np.random.default_rng(20240611)
        shapes = [(2,), (3,), (4,), (2, 2)]
        worst = 0.0
        for k in range(10):
            extents = shapes[k % len(shapes)]
            n = math.prod(extents)
            w = rng.uniform(-2, 2, n)
            A = build_effective_hamiltonian(LatticeSpec(extents, dict(enumerate(w)))).to_dense()
            B = one_excitation_block(full_spin_hamiltonian(extents, w), n)
            worst = max(worst, remove_identity_shift(A, B)[1])
        return worst

    worst, dt = _timed(run)
    return _report(1, "one-excitation sector vs brute force", worst <= 1e-12,
                   f"max entry residual {worst:.2e} over 10 lattices", dt, 1.0)


# --- 2 ------------------------------------------------------------------------

def criterion_2():
    def run():
        L, n0 = 4096, 2048
        d = np.arange(-60, 61)
        worst = 0.0
        lat = LatticeSpec((L,))
        for t in (5.0, 10.0, 20.0):
            exact = bessel_amplitude(d, t) * np.exp(-2j * t)
            sep = evolve_separable(inject_delta(lat, (n0,)), t).grid()[n0 + d]
            kry = evolve_krylov(inject_delta(lat, (n0,), FULLGRID), t).grid()[n0 + d]
            worst = max(worst, np.max(np.abs(sep - exact)), np.max(np.abs(kry - exact)))
        return worst

    worst, dt = _timed(run)
    return _report(2, "Bessel amplitudes on a 4096-site chain", worst < 1e-8,
                   f"max |error| {worst:.2e} (both engines, t in 5/10/20, |d|<=60)", dt, 10.0)


# --- 3 ------------------------------------------------------------------------

def criterion_3():
    def run():
        lat = LatticeSpec((64, 64))
        spec = WavePacketSpec((20.0, 24.0), Region.centered_box((20, 24), 21), 3.0, (math.pi / 2, math.pi / 3))
        s0 = make_wavepacket(lat, spec, FULLGRID)
        a = evolve_separable(s0, 40.0).grid()
        b = evolve_krylov(s0, 40.0, config=PropagatorConfig(method="krylov")).grid()
        dist = float(np.linalg.norm(a - b))
        drift = max(abs(np.vdot(a, a).real - 1.0), abs(np.vdot(b, b).real - 1.0))
        return dist, drift

    (dist, drift), dt = _timed(run)
    return _report(3, "separable vs Krylov on 64x64 at t=40", dist < 1e-8 and drift < 1e-9,
                   f"distance {dist:.2e}, norm drift {drift:.2e}", dt, 60.0)


# --- 4 ------------------------------------------------------------------------

def _diagonal_2048(workers):
    return cli.simulate(_doc("diagonal_2048.json", "simulate"), workers)


def criterion_4():
    res, dt = _timed(lambda: _diagonal_2048(1))
    _cache[4] = res
    s = res["summary"]
    ok = s["p_max"] > 0.5 and abs(s["distance"]["euclidean"] - 1969) < 1
    return _report(4, "2048x2048 diagonal link crosses 1/2", ok,
                   f"p_max {s['p_max']:.4f} at t={s['t_prop']:.2f}, sigma {s['sigma']}, "
                   f"distance {s['distance']['euclidean']:.1f}", dt, 300.0)


# --- 5 ------------------------------------------------------------------------

def criterion_5():
    def run():
        zero = [amplitude_damping_capacity(p) for p in (0.1, 0.3, 0.5)]
        pos = [amplitude_damping_capacity(p) for p in (0.51, 0.75, 1.0)]
        grid = [amplitude_damping_capacity(p) for p in np.linspace(0, 1, 100)]
        mono = all(b >= a for a, b in zip(grid, grid[1:]))
        return zero, pos, mono

    (zero, pos, mono), dt = _timed(run)
    ok = all(q == 0.0 for q in zero) and all(q > 0 for q in pos) and abs(pos[-1] - 1) <= 1e-10 and mono
    return _report(5, "amplitude damping capacity thresholds", ok,
                   f"Q(0.51)={pos[0]:.3e}, Q(0.75)={pos[1]:.6f}, Q(1)={pos[2]!r}, monotone={mono}", dt, 1.0)


# --- 6 ------------------------------------------------------------------------

def criterion_6():
    rep, dt = _timed(lambda: verify_multiparticle_threshold(simplex_grid(20, spectra=((1.0,), (0.5, 0.5)))))
    return _report(6, "multi-particle threshold p > q", rep["violations"] == 0,
                   f"{rep['n_points']} points (rank 1 and 2), {rep['violations']} violations", dt, 60.0)


# --- 7 ------------------------------------------------------------------------

def _scaling(workers):
    return cli.scaling(_doc("scaling_desk.json", "scaling"), workers)


def criterion_7():
    res, dt = _timed(lambda: _scaling(1))
    _cache[7] = res
    slopes = {p: v["slope"] for p, v in res["summary"]["fitted_slopes"].items()}
    ok = len(slopes) == 3 and all(0.25 <= s <= 0.45 for s in slopes.values())
    text = ", ".join(f"p={p}: {s:.3f}" for p, s in slopes.items())
    return _report(7, "receiver width scaling slopes", ok, f"slopes {text}", dt, 900.0)


# --- 8 ------------------------------------------------------------------------

def criterion_8():
    res, dt = _timed(lambda: cli.simulate(_doc("antenna_256.json", "simulate"), 1))
    s = res["summary"]
    gain = s["antenna_gain"]
    return _report(8, "V-antenna barrier beats the bare lattice", gain > 0.05,
                   f"p_max {s['p_max']:.4f} vs {s['baseline_without_antennas']['p_max']:.4f}, "
                   f"gain {gain:.4f}", dt, 600.0)


# --- 9 ------------------------------------------------------------------------

def criterion_9():
    def run():
        a4 = _cache.get(4) or _diagonal_2048(1)
        a7 = _cache.get(7) or _scaling(1)
        b4, b7 = _diagonal_2048(2), _scaling(2)
        return [(name, a["files"][name] == b["files"][name])
                for a, b in ((a4, b4), (a7, b7)) for name in a["files"] if name.endswith(".csv")]

    same, dt = _timed(run)
    ok = bool(same) and all(eq for _, eq in same)
    detail = ", ".join(f"{name} {'identical' if eq else 'DIFFERS'}" for name, eq in same)
    return _report(9, "workers=1 vs workers=2 CSVs", ok, detail, dt, math.inf)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(criterion):
    ok, line = criterion()
    assert ok, line


if __name__ == "__main__":
    results = [c()[0] for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
