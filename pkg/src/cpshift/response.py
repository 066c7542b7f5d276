"""Surface response: permittivity models, the nonretarded image factor and
the coincident-point scattering Green tensor.

Frequencies are angular (rad/s) and may be complex; ``1j * xi`` evaluates
on the imaginary axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .constants import C_LIGHT, EPS0, HBAR, MU0


# relative distance from eps = -1 treated as sitting on the surface-plasmon pole
_POLE_TOL = 8 * np.finfo(float).eps


class ResponseError(ValueError):
    pass


class PoleError(ResponseError):
    """Permittivity or reflection factor evaluated on a pole."""


@dataclass(frozen=True)
class Drude:
    omega_p: float
    gamma: float

    def __post_init__(self):
        if self.omega_p <= 0 or self.gamma < 0:
            raise ResponseError("Drude requires omega_p > 0 and gamma >= 0")


@dataclass(frozen=True)
class LorentzMetamaterial:
    """Effective medium ``1 - (wp^2 - w0^2)/(w^2 - w0^2 + i g w)``."""

    omega_p: float
    omega_0: float
    gamma: float

    def __post_init__(self):
        if self.omega_p <= 0 or self.omega_0 <= 0 or self.gamma < 0:
            raise ResponseError("metamaterial requires omega_p, omega_0 > 0 and gamma >= 0")


@dataclass(frozen=True)
class PerfectConductor:
    pass


DielectricModel = Union[Drude, LorentzMetamaterial, PerfectConductor]

#: gold, as used for the Rb figures
GOLD = Drude(1.37e16, 4.12e13)
#: left-handed metamaterial of the mixing example
METAMATERIAL = LorentzMetamaterial(2 * math.pi * 20e9, 2 * math.pi * 10e9, 2 * math.pi * 1e9)


def permittivity(model: DielectricModel, omega):
    """Relative permittivity; ``inf`` for the perfect conductor."""
    w = np.asarray(omega, dtype=complex)
    if isinstance(model, PerfectConductor):
        return np.full(w.shape, np.inf) if w.shape else np.inf
    if isinstance(model, Drude):
        den = w * (w + 1j * model.gamma)
        if np.any(den == 0):
            raise PoleError("Drude permittivity has a pole at omega = 0")
        return 1.0 - model.omega_p**2 / den
    if isinstance(model, LorentzMetamaterial):
        den = w * w - model.omega_0**2 + 1j * model.gamma * w
        if np.any(den == 0):
            raise PoleError("metamaterial permittivity pole at omega = omega_0")
        return 1.0 - (model.omega_p**2 - model.omega_0**2) / den
    raise TypeError(f"unknown dielectric model {model!r}")


def permittivity_derivative(model: DielectricModel, omega):
    w = np.asarray(omega, dtype=complex)
    if isinstance(model, PerfectConductor):
        return np.zeros(w.shape) if w.shape else 0.0
    if isinstance(model, Drude):
        den = w * (w + 1j * model.gamma)
        return model.omega_p**2 * (2 * w + 1j * model.gamma) / den**2
    if isinstance(model, LorentzMetamaterial):
        den = w * w - model.omega_0**2 + 1j * model.gamma * w
        return (model.omega_p**2 - model.omega_0**2) * (2 * w + 1j * model.gamma) / den**2
    raise TypeError(f"unknown dielectric model {model!r}")


def image_factor(model: DielectricModel, omega):
    """Nonretarded reflection coefficient ``(eps - 1)/(eps + 1)``."""
    if isinstance(model, PerfectConductor):
        w = np.asarray(omega)
        return np.ones(w.shape, dtype=complex) if w.shape else 1.0 + 0j
    eps = permittivity(model, omega)
    on_pole = np.abs(eps + 1.0) <= _POLE_TOL * np.maximum(1.0, np.abs(eps))
    if np.any(on_pole):
        bad = np.asarray(omega)[on_pole] if np.ndim(eps) else omega
        raise PoleError(f"surface-plasmon pole (eps = -1) at omega = {bad}")
    return (eps - 1.0) / (eps + 1.0)


def image_factor_derivative(model: DielectricModel, omega):
    if isinstance(model, PerfectConductor):
        w = np.asarray(omega)
        return np.zeros(w.shape, dtype=complex) if w.shape else 0j
    eps = permittivity(model, omega)
    return 2.0 * permittivity_derivative(model, omega) / (eps + 1.0) ** 2


def static_image_factor(model: DielectricModel) -> float:
    """``r`` in the zero-frequency limit (approached along the imaginary axis)."""
    if isinstance(model, (PerfectConductor, Drude)):
        return 1.0
    delta = model.omega_p**2 - model.omega_0**2
    return delta / (2 * model.omega_0**2 + delta)


def image_factor_deficit_imag(model: DielectricModel, xi):
    """``r(i xi) - r(0)`` for real ``xi >= 0``, free of cancellation."""
    x = np.asarray(xi, dtype=float)
    if isinstance(model, PerfectConductor):
        return np.zeros(x.shape)
    if isinstance(model, Drude):
        # r(i xi) = wsp^2 / (xi^2 + g xi + wsp^2)
        q = x * x + model.gamma * x
        return -q / (q + 0.5 * model.omega_p**2)
    half = 0.5 * (model.omega_p**2 - model.omega_0**2)
    res2 = 0.5 * (model.omega_p**2 + model.omega_0**2)
    q = x * x + model.gamma * x
    return -half * q / (res2 * (q + res2))


def surface_resonance(model: DielectricModel) -> float | None:
    """Real frequency where ``eps = -1`` in the lossless limit."""
    if isinstance(model, PerfectConductor):
        return None
    if isinstance(model, Drude):
        return model.omega_p / math.sqrt(2.0)
    return math.sqrt(0.5 * (model.omega_p**2 + model.omega_0**2))


@dataclass(frozen=True)
class GreenTensorDiag:
    gxx: complex
    gyy: complex
    gzz: complex
    z: float
    omega: complex


def _check_z(z):
    if np.any(np.asarray(z) <= 0):
        raise ResponseError("atom-surface distance must be positive")


def scattering_green_diag(model: DielectricModel, z: float, omega) -> GreenTensorDiag:
    """Coincident-point scattering Green tensor in the nonretarded limit."""
    _check_z(z)
    w = np.asarray(omega, dtype=complex)
    g = C_LIGHT**2 * image_factor(model, w) / (32 * math.pi * w * w * z**3)
    return GreenTensorDiag(g, g, 2 * g, z, omega)


def _contract(d2_parallel, d2_perp):
    if np.any(np.asarray(d2_parallel) < 0) or np.any(np.asarray(d2_perp) < 0):
        raise ResponseError("squared dipole components must be non-negative")
    return d2_parallel + 2.0 * d2_perp


def kernel_scale(d2_parallel: float, d2_perp: float, z: float) -> float:
    """``mu0 w^2 d.G.d / (hbar r)`` (rad/s); the frequency-independent part."""
    _check_z(z)
    return _contract(d2_parallel, d2_perp) / (32 * math.pi * EPS0 * HBAR * z**3)


def response_kernel(d2_parallel: float, d2_perp: float, model: DielectricModel, z: float, omega):
    """``mu0 w^2 d.G(w).d / hbar`` in rad/s, analytic in the upper half plane.

    Real and positive on the imaginary axis; for the perfect conductor it is
    the same constant at every frequency.
    """
    return kernel_scale(d2_parallel, d2_perp, z) * image_factor(model, omega)


def coupling_weight(d2_parallel: float, d2_perp: float, model: DielectricModel, z: float, omega):
    """``|g(r_A, w)|^2 = mu0 w^2 d.Im G.d / (hbar pi)`` for real ``w > 0``.

    Identically zero for the perfect conductor: its image factor is real.
    """
    _contract(d2_parallel, d2_perp)
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ResponseError("coupling weight is defined for real omega > 0")
    if isinstance(model, PerfectConductor):
        return np.zeros(w.shape) if w.shape else 0.0
    green = scattering_green_diag(model, z, w)
    dgd = d2_parallel * green.gxx.imag + d2_perp * green.gzz.imag
    return MU0 * w * w * dgd / (HBAR * math.pi)
