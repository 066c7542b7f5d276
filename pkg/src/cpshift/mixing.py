"""Surface-induced state mixing: normalization components, admixture
probabilities and the induced dipole of a nominally forbidden transition."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .atomic import (
    GridSpec,
    QuantumDefectSet,
    StateLabel,
    dipole_matrix_element,
    to_si_dipole_squared,
)
from .channels import ChannelSpectrum
from .integrals import QuadratureConfig
from .response import DielectricModel
from .shift import SolverConfig, channel_slope, solve_exact_shift


class MixingValidityError(ValueError):
    """A normalization component is negative beyond tolerance."""


class IncompleteSumError(KeyError):
    def __init__(self, missing):
        super().__init__(f"no mixing amplitude for: {', '.join(map(str, missing))}")
        self.missing = tuple(missing)


class ThresholdWarning(UserWarning):
    """Denominator offset sits on the residue threshold; theta(0) = 1/2 used."""


def normalization_component(
    channel: ChannelSpectrum,
    model: DielectricModel,
    z: float,
    delta_n: float,
    quad: QuadratureConfig = QuadratureConfig(),
    threshold_tol: float = 1e-12,
) -> float:
    """Dimensionless weight ``N_nk`` of channel ``k`` in the normalization.

    Residue term ``theta(-a) Re F'(-a)`` plus the imaginary-axis integral of
    ``F(i xi)(a^2 - xi^2)/(a^2 + xi^2)^2 / pi`` with ``a = omega_kn - delta_n``.
    """
    a = channel.omega_kn - delta_n
    if abs(a) <= threshold_tol * abs(channel.omega_kn):
        warnings.warn(f"channel {channel.partner}: offset {a:.3e} at threshold", ThresholdWarning)
    return channel_slope(channel, model, z, delta_n, quad)


@dataclass(frozen=True)
class ChannelMixing:
    partner: StateLabel
    N_nk: float
    p_k: float
    #: signed amplitude -sign(d_nk) sqrt(p_k); zero when p_k <= 0
    amplitude: float


@dataclass(frozen=True)
class InducedDipole:
    initial: StateLabel
    final: StateLabel
    magnitude: float  # C m
    ratio: float | None
    terms: tuple = ()


@dataclass
class MixingReport:
    state: StateLabel
    z: float
    delta_n: float
    p0: float
    channels: list
    flags: list = field(default_factory=list)
    induced_dipoles: list = field(default_factory=list)

    @property
    def N_n(self) -> float:
        return 1.0 + math.fsum(c.N_nk for c in self.channels)

    @property
    def total_admixture(self) -> float:
        return math.fsum(c.p_k for c in self.channels)

    def channel(self, partner: StateLabel) -> ChannelMixing:
        for c in self.channels:
            if c.partner == partner:
                return c
        raise IncompleteSumError([partner])


def mixing_probabilities(
    state: StateLabel,
    channels: Sequence[ChannelSpectrum],
    model: DielectricModel,
    z: float,
    delta_n: float | None = None,
    cfg: SolverConfig = SolverConfig(),
    negative_tol: float = 1e-12,
) -> MixingReport:
    """Retention ``p0 = 1/N_n`` and admixtures ``p_k = N_nk/N_n``.

    ``delta_n`` defaults to the exact shift at the same ``(model, z)``.
    Components in ``[-negative_tol, 0)`` are kept as computed and flagged;
    anything more negative raises :class:`MixingValidityError`.
    """
    if delta_n is None:
        delta_n = solve_exact_shift(channels, model, z, cfg).delta_exact
    comps = [normalization_component(c, model, z, delta_n, cfg.quadrature) for c in channels]
    flags = []
    for c, n in zip(channels, comps):
        if n < -negative_tol:
            raise MixingValidityError(f"N_nk = {n:.3e} < 0 for {state} -> {c.partner} at z = {z:.3e} m")
        if n < 0:
            flags.append(f"negative N_nk {n:.3e} for {c.partner}")
    norm = 1.0 + math.fsum(comps)
    mixes = []
    for c, n in zip(channels, comps):
        p = n / norm
        amp = -math.copysign(math.sqrt(p), c.dipole_sign) if p > 0 else 0.0
        mixes.append(ChannelMixing(c.partner, n, p, amp))
    return MixingReport(state, z, delta_n, 1.0 / norm, mixes, flags)


def induced_transition_dipole(
    initial: StateLabel,
    final: StateLabel,
    report: MixingReport,
    defects: QuantumDefectSet,
    via: Sequence[StateLabel] | None = None,
    reference: StateLabel | None = None,
    orientation: str = "isotropic",
    grid_spec: GridSpec = GridSpec(),
) -> InducedDipole:
    """``sum_k C_k d_{k, final}`` for a transition forbidden at zeroth order.

    ``via`` restricts the sum to the listed intermediate states (all report
    channels that connect to ``final`` by default). The ratio is taken
    against the allowed dipole ``initial -> reference`` when given.
    """
    if abs(initial.l - final.l) == 1:
        raise ValueError(f"{initial} -> {final} is already dipole-allowed")
    if report.state != initial:
        raise ValueError("report belongs to a different initial state")
    known = {c.partner: c for c in report.channels}
    if via is None:
        via = [k for k in known if abs(k.l - final.l) == 1 and abs(k.j - final.j) <= 1]
    missing = [k for k in via if k not in known]
    if missing:
        raise IncompleteSumError(missing)
    total = 0.0
    terms = []
    for k in via:
        dip = dipole_matrix_element(k, final, defects, orientation, grid_spec)
        term = known[k].amplitude * dip.signed_magnitude
        terms.append((k, term))
        total += term
    magnitude = math.sqrt(to_si_dipole_squared(total * total))
    ratio = None
    if reference is not None:
        ref = dipole_matrix_element(initial, reference, defects, orientation, grid_spec).signed_magnitude
        ratio = abs(total / ref)
    result = InducedDipole(initial, final, magnitude, ratio, tuple(terms))
    report.induced_dipoles.append(result)
    return result
