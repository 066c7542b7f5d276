"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line through the ``criterion`` fixture; the
lines are printed in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from cpshift.arrowhead import ArrowheadSystem, dense_oracle, find_pick_roots
from cpshift.atomic import QuantumDefectSet, StateLabel, effective_n
from cpshift.channels import ChannelSpectrum, build_channels
from cpshift.mixing import induced_transition_dipole, mixing_probabilities, normalization_component
from cpshift.response import GOLD, METAMATERIAL, Drude, LorentzMetamaterial, PerfectConductor, surface_resonance
from cpshift.scenario import convergence_study, parse_config
from cpshift.shift import (
    next_order_correction,
    perturbative_shift,
    self_consistent_network,
    solve_exact_shift,
    spectral_integral,
)

from oracles import fourth_order_factorisable, real_axis_shift_integral

RB = QuantumDefectSet.rubidium()
S32, P32, S33 = (StateLabel.parse(t) for t in ("32S1/2", "32P1/2", "33S1/2"))
UM = 1e-6


@pytest.fixture(scope="module")
def s32_channels():
    return build_channels(S32, RB)


def test_c01_arrowhead_oracle_equivalence(criterion):
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    worst_rel, worst_trace, interlaced = 0.0, 0.0, True
    for n in (10, 50, 200, 500):
        for _ in range(25):
            d = np.sort(rng.uniform(-10.0, 10.0, n))
            w = rng.exponential(1.0, n) * 10.0 ** rng.uniform(-6, 1, n)
            sys = ArrowheadSystem(float(rng.normal()), d, w)
            roots = np.sort(find_pick_roots(sys).roots)
            ref = dense_oracle(sys)
            rel = np.abs(roots - ref) / np.maximum(np.abs(ref), 1e-14 * sys.scale)
            worst_rel = max(worst_rel, float(rel.max()))
            interlaced &= bool(np.all(roots[:-1] < d) and np.all(d < roots[1:]))
            tr = sys.a + d.sum()
            worst_trace = max(worst_trace, abs(roots.sum() - tr) / max(abs(tr), np.abs(roots).sum() * 1e-16))
    elapsed = time.perf_counter() - start
    ok = worst_rel < 1e-10 and interlaced and worst_trace < 1e-9 and elapsed < 60
    criterion(1, ok, f"max rel {worst_rel:.2e}, trace {worst_trace:.2e}, interlacing {interlaced}, {elapsed:.1f}s")
    assert ok


def test_c02_discrete_to_continuum(criterion):
    cfg = parse_config(
        """
[atom]
states = 32S1/2
dn_max = 0
[surface]
model = drude
omega_p = 1.37e16
gamma = 4.12e13
[scan]
z = 1e-6
outputs = shift_exact
[convergence]
n = 250, 500, 1000, 2000, 4000, 8000
grid = log
partner = 32P1/2
"""
    )
    start = time.perf_counter()
    res = convergence_study(cfg)
    elapsed = time.perf_counter() - start
    gaps = {n: abs(diff) for n, _, _, diff in res.rows}
    tail = [gaps[n] for n in sorted(gaps) if n >= 500]
    monotone = all(b < a for a, b in zip(tail, tail[1:]))
    final = gaps[8000] / abs(res.rows[-1][2])
    ok = monotone and final < 0.01 and elapsed < 300
    criterion(2, ok, f"monotone {monotone}, gap at N=8000 {100 * final:.2f}% of shift, order {res.fitted_order:.2f}, {elapsed:.1f}s")
    assert ok


def test_c03_perfect_conductor_no_mixing(criterion):
    worst, p0_exact = 0.0, True
    for state in (S32, P32):
        ch = build_channels(state, RB)
        for z in np.geomspace(0.1 * UM, 10 * UM, 9):
            rep = mixing_probabilities(state, ch, PerfectConductor(), z)
            worst = max(worst, max(abs(c.N_nk) for c in rep.channels))
            p0_exact &= rep.p0 == 1.0
            for c in ch:
                worst = max(worst, abs(normalization_component(c, PerfectConductor(), z, rep.delta_n)))
    ok = worst < 1e-14 and p0_exact
    criterion(3, ok, f"max |N_nk| = {worst:.1e}, p0 == 1: {p0_exact}")
    assert ok


def test_c04_gold_mixing_magnitude(criterion, s32_channels):
    zs = np.geomspace(0.5 * UM, 2 * UM, 7)
    totals = [mixing_probabilities(S32, s32_channels, GOLD, z).total_admixture for z in zs]
    inside = [1e-7 <= t <= 1e-3 for t in totals]
    detail = ", ".join(f"{z / UM:.2f}um:{t:.1e}" for z, t in zip(zs, totals))
    ok = all(inside)
    criterion(4, ok, f"sum p_k {detail} (window 1e-7..1e-3)")
    assert ok


def test_c05_scaling_laws(criterion):
    ch = build_channels(S32, RB)
    zs = np.geomspace(0.5 * UM, 5 * UM, 10)
    vals = [abs(perturbative_shift(ch, PerfectConductor(), z)) for z in zs]
    z_slope = float(np.polyfit(np.log(zs), np.log(vals), 1)[0])
    ns = np.arange(20, 41)
    shifts = [abs(perturbative_shift(build_channels(StateLabel(int(n), 0, 0.5), RB), PerfectConductor(), UM)) for n in ns]
    n_slope = float(np.polyfit(np.log(ns), np.log(shifts), 1)[0])
    nstar = [effective_n(StateLabel(int(n), 0, 0.5), RB) for n in ns]
    nstar_slope = float(np.polyfit(np.log(nstar), np.log(shifts), 1)[0])
    ok = abs(z_slope + 3.0) <= 0.01 and abs(n_slope - 4.0) <= 0.5
    criterion(5, ok, f"z exponent {z_slope:.4f}, n exponent {n_slope:.4f} (vs n*: {nstar_slope:.4f})")
    assert ok


def test_c06_exact_vs_perturbative(criterion, s32_channels):
    zs = np.geomspace(0.1 * UM, 5 * UM, 18)
    res = [solve_exact_shift(s32_channels, GOLD, z) for z in zs]
    smaller = all(r.delta_exact < 0 and abs(r.delta_exact) < abs(r.delta_pt1) for r in res)
    gaps = [abs(r.delta_exact - r.delta_pt1) / abs(r.delta_pt1) for r in res]
    below = [g for z, g in zip(zs, gaps) if z <= 1 * UM]
    grows = all(a > b for a, b in zip(below, below[1:]))  # zs ascending, so gaps fall
    ghz = max(abs(r.delta_exact) / (2 * math.pi) for z, r in zip(zs, res) if z <= 1 * UM)
    ok = smaller and grows and ghz > 1e8
    criterion(6, ok, f"|exact|<|pt1| {smaller}, gap monotone {grows} ({gaps[0]:.1e} at 0.1um), max |nu| {ghz / 1e9:.2f} GHz")
    assert ok


def _random_upward_set(rng):
    models = [GOLD, METAMATERIAL, Drude(10 ** rng.uniform(14.5, 16.3), 10 ** rng.uniform(12, 14.5))]
    model = models[int(rng.integers(3))]
    res = surface_resonance(model)
    chans = []
    for _ in range(int(rng.integers(1, 4))):
        d2 = 10 ** rng.uniform(-54, -52)
        f = rng.uniform(0.2, 0.8)
        chans.append(ChannelSpectrum(None, res * 10 ** rng.uniform(-3, 1), f * d2, (1 - f) * d2))
    return chans, model, 10 ** rng.uniform(-7, -5.5)


def test_c07_resummation_identity(criterion, s32_channels):
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        chans, model, z = _random_upward_set(rng)
        ours = next_order_correction(chans, model, z)
        ref = fourth_order_factorisable(chans, model, z)
        worst = max(worst, abs(ours - ref) / abs(ref))
    scales = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    errs = []
    for s in scales:
        r = solve_exact_shift([c.scaled(s) for c in s32_channels], METAMATERIAL, 0.5 * UM)
        errs.append(abs(r.delta_exact - r.delta_pt1 - r.delta_pt2_correction))
    order = float(np.polyfit(np.log(scales), np.log(errs), 1)[0])
    ok = worst < 1e-8 and order >= 2.5
    criterion(7, ok, f"max rel vs fourth-order term {worst:.1e}, error order {order:.2f}")
    assert ok


def test_c08_wick_rotation_equals_pv(criterion):
    rng = np.random.default_rng(88)
    start = time.perf_counter()
    worst, downward = 0.0, 0
    for i in range(50):
        if i % 2:
            model = Drude(10 ** rng.uniform(14.5, 16.3), 10 ** rng.uniform(12, 14.5))
        else:
            w0 = 2 * math.pi * 10 ** rng.uniform(9, 11)
            model = LorentzMetamaterial(w0 * rng.uniform(1.2, 3.0), w0, w0 * 10 ** rng.uniform(-2.5, -0.5))
        res = surface_resonance(model)
        sign = -1.0 if rng.random() < 0.5 else 1.0
        downward += sign < 0
        d2 = 10 ** rng.uniform(-54, -52)
        c = ChannelSpectrum(None, sign * res * 10 ** rng.uniform(-3, 1), 0.6 * d2, 0.4 * d2)
        z = 10 ** rng.uniform(-7, -5.5)
        guess = rng.uniform(-0.1, 0.1) * abs(c.omega_kn)
        ours = spectral_integral(c, model, z, guess)
        ref = real_axis_shift_integral(c, model, z, guess)
        worst = max(worst, abs(ours - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 120
    criterion(8, ok, f"max rel {worst:.1e} over 50 cases ({downward} downward), {elapsed:.1f}s")
    assert ok


def test_c09_metamaterial_mixing(criterion, s32_channels):
    zs = np.geomspace(0.1 * UM, 2 * UM, 12)
    totals, ratios = [], []
    for z in zs:
        rep = mixing_probabilities(S32, s32_channels, METAMATERIAL, z)
        totals.append(rep.total_admixture)
        ratios.append(induced_transition_dipole(S32, S33, rep, RB, via=[P32], reference=P32).ratio)
    decreasing = all(b < a for a, b in zip(totals, totals[1:]))
    ok = decreasing and totals[0] > 1e-4 and max(ratios) >= 0.05
    criterion(9, ok, f"decreasing {decreasing}, sum p_k {totals[0]:.2e} at 0.1um, max d ratio {max(ratios):.3f}")
    assert ok


def test_c10_network_correction_small(criterion, s32_channels):
    levels = {S32: s32_channels, P32: build_channels(P32, RB)}
    worst = 0.0
    for z in np.geomspace(0.1 * UM, 5 * UM, 10):
        net = self_consistent_network(levels, GOLD, z)
        ind = net.independent[S32]
        worst = max(worst, abs(net.network[S32].delta_exact - ind.delta_exact) / abs(ind.delta_exact - ind.delta_pt1))
    ok = worst < 1.0
    criterion(10, ok, f"max |net - exact| / |exact - pt1| = {worst:.3f}")
    assert ok
