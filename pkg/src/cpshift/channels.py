"""Coupling channels of one atomic level: partner states, transition
frequencies and squared dipole components in SI units."""

from __future__ import annotations

from dataclasses import dataclass

from .atomic import (
    GridSpec,
    QuantumDefectSet,
    StateLabel,
    dipole_matrix_element,
    energy_level,
    select_relevant_states,
    to_si_dipole_squared,
)
from .constants import HARTREE_TO_RAD_S


@dataclass(frozen=True)
class ChannelSpectrum:
    """One intermediate state ``k`` seen from level ``n``.

    ``omega_kn`` is ``omega_k - omega_n`` (rad/s, negative for downward
    channels); ``d2_parallel`` sums both in-plane components and
    ``d2_perp`` is the surface-normal one, both in (C m)^2.
    """

    partner: StateLabel | None
    omega_kn: float
    d2_parallel: float
    d2_perp: float
    dipole_sign: float = 1.0

    def __post_init__(self):
        if self.omega_kn == 0:
            raise ValueError("channel transition frequency must be nonzero")
        if self.d2_parallel < 0 or self.d2_perp < 0:
            raise ValueError("squared dipole components must be non-negative")

    def scaled(self, factor: float) -> "ChannelSpectrum":
        return ChannelSpectrum(
            self.partner, self.omega_kn, self.d2_parallel * factor, self.d2_perp * factor, self.dipole_sign
        )


def transition_frequency(a: StateLabel, b: StateLabel, defects: QuantumDefectSet) -> float:
    """``omega_b - omega_a`` in rad/s."""
    return (energy_level(b, defects) - energy_level(a, defects)) * HARTREE_TO_RAD_S


def build_channels(
    state: StateLabel,
    defects: QuantumDefectSet,
    dn_max: int = 2,
    orientation: str = "isotropic",
    grid_spec: GridSpec = GridSpec(),
    partners: list[StateLabel] | None = None,
) -> list[ChannelSpectrum]:
    partners = partners if partners is not None else select_relevant_states(state, dn_max, defects)
    out = []
    for k in partners:
        dip = dipole_matrix_element(state, k, defects, orientation, grid_spec)
        if dip.magnitude_squared == 0.0:
            continue
        out.append(
            ChannelSpectrum(
                k,
                transition_frequency(state, k, defects),
                to_si_dipole_squared(dip.d2_parallel),
                to_si_dipole_squared(dip.d2_perp),
                1.0 if dip.reduced_radial >= 0 else -1.0,
            )
        )
    return out
