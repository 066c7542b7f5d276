"""Surface-induced level shifts: perturbative, exact (self-consistent) and
network variants.

The exact shift of level ``n`` solves ``delta = -sum_k I_k(omega_kn - delta)``,
where ``I_k`` is the Wick-rotated shift integral of channel ``k``
(:func:`spectral_integral`). The solver uses damped fixed-point steps and
finishes with Newton, whose derivative is ``1 + sum_k N_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .atomic import StateLabel
from .channels import ChannelSpectrum
from .integrals import QuadratureConfig, shift_integral_parts, squared_integral_parts
from .response import DielectricModel


class ShiftConvergenceError(RuntimeError):
    """Raised when an iteration fails; ``trace`` holds (iteration, delta, residual)."""

    def __init__(self, message: str, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 200
    damping: float = 0.5
    newton_switch: float = 1e-2
    max_restarts: int = 3
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)


@dataclass(frozen=True)
class LevelShiftResult:
    delta_exact: float
    delta_pt1: float
    delta_pt2_correction: float
    residual: float
    iterations: int
    converged: bool
    trace: tuple = ()


def spectral_integral_parts(
    channel: ChannelSpectrum,
    model: DielectricModel,
    z: float,
    shift_guess: float = 0.0,
    quad: QuadratureConfig = QuadratureConfig(),
    offset: float = 0.0,
) -> tuple[float, float]:
    """(nonresonant, residue) contributions at denominator ``omega_kn + offset - shift_guess``."""
    a = channel.omega_kn + offset - shift_guess
    return shift_integral_parts(channel.d2_parallel, channel.d2_perp, model, z, a, quad)


def spectral_integral(
    channel: ChannelSpectrum,
    model: DielectricModel,
    z: float,
    shift_guess: float = 0.0,
    quad: QuadratureConfig = QuadratureConfig(),
    offset: float = 0.0,
) -> float:
    """``(1/pi) P int Im F(w) / (w + omega_kn - shift_guess) dw`` in rad/s."""
    nonres, res = spectral_integral_parts(channel, model, z, shift_guess, quad, offset)
    return nonres + res


def channel_slope(
    channel: ChannelSpectrum,
    model: DielectricModel,
    z: float,
    shift_guess: float = 0.0,
    quad: QuadratureConfig = QuadratureConfig(),
    offset: float = 0.0,
) -> float:
    """``-d I_k / d a``: the squared-denominator integral of the channel."""
    a = channel.omega_kn + offset - shift_guess
    axis, res = squared_integral_parts(channel.d2_parallel, channel.d2_perp, model, z, a, quad)
    return axis + res


def perturbative_shift(
    channels: Sequence[ChannelSpectrum],
    model: DielectricModel,
    z: float,
    quad: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Leading-order shift ``-sum_k I_k(omega_kn)`` in rad/s."""
    return -math.fsum(spectral_integral(c, model, z, 0.0, quad) for c in channels)


def next_order_correction(
    channels: Sequence[ChannelSpectrum],
    model: DielectricModel,
    z: float,
    quad: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Next term of the expansion of the exact shift in the coupling.

    Equal to ``(sum_k I_k)(sum_l N_l)`` at zero shift, i.e. the first Newton
    correction about the perturbative value.
    """
    total_i = math.fsum(spectral_integral(c, model, z, 0.0, quad) for c in channels)
    total_n = math.fsum(channel_slope(c, model, z, 0.0, quad) for c in channels)
    return total_i * total_n


def _residual_fn(channels, model, z, quad, offsets):
    def g(delta):
        return delta + math.fsum(
            spectral_integral(c, model, z, delta, quad, off) for c, off in zip(channels, offsets)
        )

    def dg(delta):
        return 1.0 + math.fsum(
            channel_slope(c, model, z, delta, quad, off) for c, off in zip(channels, offsets)
        )

    return g, dg


def _solve_level(channels, model, z, cfg: SolverConfig, offsets, start=None):
    g, dg = _residual_fn(channels, model, z, cfg.quadrature, offsets)
    delta = start if start is not None else g(0.0) * -1.0
    trace = []
    r = g(delta)
    r0 = abs(r) if r != 0 else 1.0
    lam = cfg.damping
    newton = False
    for it in range(1, cfg.max_iter + 1):
        trace.append((it, delta, r))
        if abs(r) <= cfg.tol * max(abs(delta), 1e-300) or r == 0:
            return delta, r, it, True, tuple(trace)
        if newton or abs(r) <= cfg.newton_switch * r0:
            newton = True
            step = -r / dg(delta)
        else:
            step = -lam * r
        trial = delta + step
        r_new = g(trial)
        if abs(r_new) >= abs(r):
            if newton:
                newton = False
                trial = delta - lam * r
                r_new = g(trial)
            lam *= 0.5
            if lam < 1e-6:
                break
        delta, r = trial, r_new
    return delta, r, cfg.max_iter, False, tuple(trace)


def solve_exact_shift(
    channels: Sequence[ChannelSpectrum],
    model: DielectricModel,
    z: float,
    cfg: SolverConfig = SolverConfig(),
    offsets: Sequence[float] | None = None,
    raise_on_failure: bool = True,
) -> LevelShiftResult:
    """Self-consistent shift of one level coupled to ``channels``.

    ``offsets`` add the partner-level shifts to each denominator (network
    mode). Raises :class:`ShiftConvergenceError` on failure unless
    ``raise_on_failure`` is false, in which case ``converged`` is false.
    """
    channels = list(channels)
    offs = list(offsets) if offsets is not None else [0.0] * len(channels)
    if len(offs) != len(channels):
        raise ValueError("one offset per channel is required")
    quad = cfg.quadrature
    pt1 = perturbative_shift(channels, model, z, quad)
    pt2 = next_order_correction(channels, model, z, quad)
    delta, r, its, ok, trace = _solve_level(channels, model, z, cfg, offs)
    if not ok and raise_on_failure:
        raise ShiftConvergenceError(
            f"level shift not converged after {its} iterations (residual {r:.3e} rad/s)", trace
        )
    return LevelShiftResult(delta, pt1, pt2, r, its, ok, trace)


@dataclass(frozen=True)
class NetworkResult:
    network: dict
    independent: dict
    sweeps: int
    restarts: int

    def ratio(self, state: StateLabel) -> float:
        """Network shift over independently solved shift."""
        return self.network[state].delta_exact / self.independent[state].delta_exact


def self_consistent_network(
    levels: Mapping[StateLabel, Sequence[ChannelSpectrum]],
    model: DielectricModel,
    z: float,
    cfg: SolverConfig = SolverConfig(),
    max_sweeps: int = 100,
) -> NetworkResult:
    """Gauss-Seidel solution where each denominator carries both level shifts.

    Channel ``n -> k`` uses ``omega_kn + delta_k - delta_n``; partners outside
    ``levels`` keep zero shift.
    """
    states = list(levels)
    independent = {s: solve_exact_shift(levels[s], model, z, cfg) for s in states}
    restarts = 0
    damping = 1.0
    while True:
        deltas = {s: independent[s].delta_exact for s in states}
        last_change = math.inf
        growth = 0
        results = {}
        trace = []
        for sweep in range(1, max_sweeps + 1):
            change = 0.0
            for s in states:
                offs = [deltas.get(c.partner, 0.0) for c in levels[s]]
                d, r, its, ok, _ = _solve_level(levels[s], model, z, cfg, offs, start=deltas[s])
                if not ok:
                    raise ShiftConvergenceError(f"network level {s} failed in sweep {sweep}", trace)
                new = deltas[s] + damping * (d - deltas[s])
                change = max(change, abs(new - deltas[s]))
                deltas[s] = new
                ind = independent[s]
                results[s] = LevelShiftResult(new, ind.delta_pt1, ind.delta_pt2_correction, r, its, ok)
            trace.append((sweep, change))
            scale = max((abs(v) for v in deltas.values()), default=0.0)
            if change <= cfg.tol * max(scale, 1e-300) or change == 0.0:
                return NetworkResult(results, independent, sweep, restarts)
            growth = growth + 1 if change > last_change else 0
            last_change = change
            if growth >= 3:
                break
        restarts += 1
        if restarts > cfg.max_restarts:
            raise ShiftConvergenceError("network iteration oscillates", trace)
        damping *= 0.5
