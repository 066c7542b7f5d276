"""Frequency integrals over the surface response, evaluated by Wick rotation.

With ``F(w) = mu0 w^2 d.G(w).d / hbar`` (see :func:`response.response_kernel`)
and a denominator offset ``a = omega_kn - delta``:

* shift integral   ``(1/pi) P int_0^inf Im F(w) / (w + a) dw``
* squared integral ``(1/pi) P int_0^inf Im F(w) / (w + a)^2 dw``

Both split into a smooth imaginary-axis integral and, for ``a < 0``, a
residue at ``w = -a``. The static value ``F(i0)`` is integrated against the
kernels in closed form; only the deficit ``F(i xi) - F(i0)`` is integrated
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .response import (
    DielectricModel,
    LorentzMetamaterial,
    image_factor,
    image_factor_deficit_imag,
    image_factor_derivative,
    kernel_scale,
    static_image_factor,
    surface_resonance,
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 200
    rtol: float = 1e-10
    max_doublings: int = 6
    tail_efolds: float = 40.0


class QuadratureError(RuntimeError):
    pass


def _feature_scales(model: DielectricModel, a: float) -> tuple[float, float]:
    scales = [abs(a)] if a != 0 else []
    res = surface_resonance(model)
    if res is not None:
        scales.append(res)
    gamma = getattr(model, "gamma", 0.0)
    if gamma > 0:
        scales.append(gamma)
    if not scales:
        scales = [1.0]
    return min(scales), max(scales)


def log_quadrature(func, lo_scale: float, hi_scale: float, cfg: QuadratureConfig, atol: float = 0.0):
    """``int_0^inf func(xi) dxi`` by composite Gauss-Legendre in ``ln xi``.

    The node count starts at ``cfg.nodes`` and doubles until the relative
    change drops below ``cfg.rtol``.
    """
    t0 = math.log(lo_scale) - cfg.tail_efolds
    t1 = math.log(hi_scale) + cfg.tail_efolds
    panels = max(1, cfg.nodes // len(_GL_X))
    previous = None
    for _ in range(cfg.max_doublings + 1):
        edges = np.linspace(t0, t1, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wt = (half[:, None] * _GL_W[None, :]).ravel()
        xi = np.exp(t)
        value = float(np.sum(wt * xi * func(xi)))
        if previous is not None and abs(value - previous) <= cfg.rtol * abs(value) + atol:
            return value
        previous = value
        panels *= 2
    raise QuadratureError(f"imaginary-axis quadrature not converged (last change {abs(value - previous):.3e})")


def _theta(a: float) -> float:
    return 1.0 if a < 0 else (0.5 if a == 0 else 0.0)


def shift_integral_parts(
    d2_parallel: float,
    d2_perp: float,
    model: DielectricModel,
    z: float,
    a: float,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> tuple[float, float]:
    """(nonresonant, residue) parts of the shift integral at offset ``a``."""
    scale = kernel_scale(d2_parallel, d2_perp, z)
    if scale == 0.0:
        return 0.0, 0.0
    f_static = scale * static_image_factor(model)
    nonres = 0.5 * math.copysign(f_static, a) if a != 0 else 0.0
    if a != 0:
        lo, hi = _feature_scales(model, a)
        rem = log_quadrature(
            lambda xi: a * image_factor_deficit_imag(model, xi) / (a * a + xi * xi),
            lo,
            hi,
            cfg,
            atol=1e-15 * abs(f_static),
        )
        nonres += scale * rem / math.pi
    residue = 0.0
    th = _theta(a)
    if th:
        r = static_image_factor(model) if a == 0 else float(np.real(image_factor(model, complex(-a))))
        residue = th * scale * r
    return nonres, residue


def squared_integral_parts(
    d2_parallel: float,
    d2_perp: float,
    model: DielectricModel,
    z: float,
    a: float,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> tuple[float, float]:
    """(imaginary-axis, residue) parts of the squared-denominator integral.

    The imaginary-axis part is ``(1/pi) int F(i xi) (a^2 - xi^2)/(a^2 + xi^2)^2``;
    the kernel integrates to zero, so a frequency-independent ``F`` drops out
    exactly.
    """
    scale = kernel_scale(d2_parallel, d2_perp, z)
    if scale == 0.0:
        return 0.0, 0.0
    a2 = a * a
    lo, hi = _feature_scales(model, a)
    axis = log_quadrature(
        lambda xi: image_factor_deficit_imag(model, xi) * (a2 - xi * xi) / (a2 + xi * xi) ** 2,
        lo,
        hi,
        cfg,
        atol=1e-300,
    )
    axis *= scale / math.pi
    residue = 0.0
    th = _theta(a)
    if th:
        if a == 0 and not isinstance(model, LorentzMetamaterial):
            slope = 0.0  # Drude: r'(0) = i gamma / wsp^2 is purely imaginary
        else:
            slope = float(np.real(image_factor_derivative(model, complex(-a))))
        residue = th * scale * slope
    return axis, residue
