"""Rydberg level structure: quantum-defect energies, Numerov radial
wavefunctions and electric-dipole matrix elements.

Everything in this module works in atomic units (hartree, bohr, e*a0).
Conversion to SI happens in :func:`to_si_dipole_squared` and in the
channel builders of :mod:`cpshift.shift`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from sympy.physics.wigner import wigner_3j, wigner_6j

from .constants import AU_DIPOLE

L_LETTERS = "SPDFGHIKLMNOQRTUV"


class AtomicDomainError(ValueError):
    """Invalid quantum numbers or incompatible inputs."""


class IntegrationFailure(RuntimeError):
    """Numerov integration produced an unphysical wavefunction."""


@dataclass(frozen=True, order=True)
class StateLabel:
    n: int
    l: int
    j: float

    def __post_init__(self):
        if self.n < 1 or self.l < 0 or self.l >= self.n:
            raise AtomicDomainError(f"invalid (n, l) = ({self.n}, {self.l})")
        if abs(2 * self.j - round(2 * self.j)) > 1e-12 or abs(abs(self.j - self.l) - 0.5) > 1e-12:
            raise AtomicDomainError(f"invalid j = {self.j} for l = {self.l}")
        object.__setattr__(self, "j", round(2 * self.j) / 2)

    @classmethod
    def parse(cls, text: str) -> "StateLabel":
        """Parse spectroscopic labels such as ``"32S1/2"`` or ``"31 P 3/2"``."""
        m = re.fullmatch(r"\s*(\d+)\s*([A-Za-z])\s*(\d+)\s*/\s*2\s*", text)
        if not m:
            raise AtomicDomainError(f"cannot parse state label {text!r}")
        n = int(m.group(1))
        l = L_LETTERS.index(m.group(2).upper())
        return cls(n, l, int(m.group(3)) / 2)

    @property
    def channel(self) -> str:
        return f"{L_LETTERS[self.l]}{int(2 * self.j)}/2"

    def __str__(self) -> str:
        return f"{self.n}{self.channel}"


@dataclass(frozen=True)
class QuantumDefectSet:
    """Per-channel Rydberg-Ritz defects ``delta0 + delta2/(n - delta0)**2``.

    Channels that are not tabulated are treated as hydrogenic (zero defect).
    """

    species: str
    entries: tuple[tuple[int, float, float, float], ...] = ()
    version: str = "unversioned"

    def coefficients(self, l: int, j: float) -> tuple[float, float]:
        for el, ej, d0, d2 in self.entries:
            if el == l and abs(ej - j) < 1e-9:
                return d0, d2
        if any(el == l for el, *_ in self.entries):
            raise AtomicDomainError(f"{self.species}: no defect for l={l}, j={j}")
        return 0.0, 0.0

    def defect(self, state: StateLabel) -> float:
        d0, d2 = self.coefficients(state.l, state.j)
        if d0 == 0.0 and d2 == 0.0:
            return 0.0
        return d0 + d2 / (state.n - d0) ** 2

    @classmethod
    def hydrogenic(cls) -> "QuantumDefectSet":
        return cls("H", (), "hydrogenic")

    @classmethod
    def from_text(cls, text: str, species: str | None = None) -> "QuantumDefectSet":
        """Parse ``species channel l j delta0 delta2`` records."""
        entries = []
        version = "unversioned"
        found_species = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("#"):
                m = re.match(r"#\s*version\s*:\s*(\S+)", line)
                if m:
                    version = m.group(1)
                continue
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise AtomicDomainError(f"defect table line {lineno}: expected 6 fields, got {len(parts)}")
            sp, chan, l, j, d0, d2 = parts
            if species is not None and sp != species:
                continue
            found_species = found_species or sp
            try:
                l, j, d0, d2 = int(l), float(j), float(d0), float(d2)
            except ValueError as exc:
                raise AtomicDomainError(f"defect table line {lineno}: {exc}") from exc
            label = f"{L_LETTERS[l]}{int(round(2 * j))}/2"
            if chan != label:
                raise AtomicDomainError(f"defect table line {lineno}: channel {chan} does not match l={l}, j={j}")
            entries.append((l, j, d0, d2))
        if not entries:
            raise AtomicDomainError(f"no defect records for species {species!r}")
        return cls(species or found_species, tuple(entries), version)

    @classmethod
    def from_file(cls, path: str | Path, species: str | None = None) -> "QuantumDefectSet":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), species)

    @classmethod
    def rubidium(cls) -> "QuantumDefectSet":
        text = resources.files("cpshift.data").joinpath("rb_defects.txt").read_text(encoding="utf-8")
        return cls.from_text(text, "Rb87")


def effective_n(state: StateLabel, defects: QuantumDefectSet) -> float:
    return state.n - defects.defect(state)


def energy_level(state: StateLabel, defects: QuantumDefectSet) -> float:
    """Binding energy in hartree, ``-1/(2 n*^2)``."""
    nstar = effective_n(state, defects)
    if nstar <= 0:
        raise AtomicDomainError(f"non-positive effective quantum number for {state}")
    return -0.5 / nstar**2


# ---------------------------------------------------------------------------
# Numerov radial solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid in ``s = sqrt(r)``; ``step`` is the spacing in sqrt(bohr)."""

    step: float = 0.01
    r_inner: float = 0.05
    points_per_wavelength: int = 20

    def outer_radius(self, n: int) -> float:
        return 2.0 * n * (n + 15)


@dataclass(frozen=True)
class RadialWavefunction:
    state: StateLabel
    grid: np.ndarray = field(repr=False)  # r values (bohr)
    u: np.ndarray = field(repr=False)  # r * R(r)
    energy: float
    step: float  # spacing in sqrt(r)
    nodes: int
    inner_tail: float = 0.0  # norm of the u ~ r^(l+1) continuation below grid[0]

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.grid)

    def norm(self) -> float:
        return float(_sqrt_grid_integral(self.s, self.u * self.u)) + self.inner_tail


def _sqrt_grid_integral(s: np.ndarray, f: np.ndarray) -> float:
    # dr = 2 s ds, trapezoid in s
    return np.trapezoid(f * 2.0 * s, s)


def _count_nodes(u: np.ndarray) -> int:
    big = np.abs(u) > 1e-8 * np.max(np.abs(u))
    signs = np.sign(u[big])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def expected_nodes(state: StateLabel, defects: QuantumDefectSet) -> int:
    """Node count of the Coulomb wavefunction at the quantum-defect energy.

    For integer ``n*`` this is ``n - l - 1``. A pure Coulomb potential has no
    core nodes, so a defect of ``delta`` removes ``floor(delta)`` of them.
    """
    return state.n - state.l - 1 - math.floor(defects.defect(state))


def numerov_radial(
    state: StateLabel, defects: QuantumDefectSet, grid_spec: GridSpec = GridSpec()
) -> RadialWavefunction:
    """Inward Numerov integration of the Coulomb radial equation.

    With ``s = sqrt(r)`` and ``u = s**0.5 * y`` the radial equation loses its
    first-derivative term: ``y'' = [8 s^2 (V - E) + (2l + 1/2)(2l + 3/2)/s^2] y``.
    """
    energy = energy_level(state, defects)
    if energy >= 0:
        raise AtomicDomainError("bound states only")
    l = state.l
    h = min(grid_spec.step, (2 * math.pi / math.sqrt(8.0)) / grid_spec.points_per_wavelength)
    k_in = max(1, math.ceil(math.sqrt(grid_spec.r_inner) / h))
    k_out = math.floor(math.sqrt(grid_spec.outer_radius(state.n)) / h)
    s = h * np.arange(k_in, k_out + 1, dtype=float)
    cent = (2 * l + 0.5) * (2 * l + 1.5)
    q = -8.0 - 8.0 * energy * s * s + cent / (s * s)
    f = 1.0 - h * h * q / 12.0

    y = np.zeros_like(s)
    m = len(s)
    y[m - 1] = 0.0
    y[m - 2] = 1e-12
    inner_tp = _inner_turning_index(q)
    stop = 0
    for i in range(m - 2, 0, -1):
        y[i - 1] = ((12.0 - 10.0 * f[i]) * y[i] - f[i + 1] * y[i + 1]) / f[i - 1]
        if i - 1 < inner_tp and abs(y[i - 1]) > abs(y[i]):
            # irregular solution takes over below the inner turning point
            stop = i
            y[: i] = 0.0
            break
        if abs(y[i - 1]) > 1e250:
            y[i - 1 :] *= 1e-250
    u = np.sqrt(s) * y
    norm = _sqrt_grid_integral(s, u * u)
    tail = 0.0
    if stop == 0:
        # regular small-r continuation u ~ r^(l+1) below the cutoff
        tail = u[0] ** 2 * s[0] ** 2 / (2 * l + 3)
        norm += tail
    if not np.isfinite(norm) or norm <= 0:
        raise IntegrationFailure(f"{state}: degenerate Numerov solution")
    u = u / math.sqrt(norm)
    # sign convention: outermost lobe positive
    u_max = np.max(np.abs(u))
    outer = np.nonzero(np.abs(u) > 1e-3 * u_max)[0][-1]
    if u[outer] < 0:
        u = -u
    nodes = _count_nodes(u)
    want = expected_nodes(state, defects)
    if nodes != want:
        raise IntegrationFailure(f"{state}: {nodes} nodes, expected {want} (bad grid or cutoff)")
    return RadialWavefunction(state, s * s, u, energy, h, nodes, tail / norm)


def _inner_turning_index(q: np.ndarray) -> int:
    # first index (from the origin) where the region becomes classically allowed
    allowed = np.nonzero(q < 0)[0]
    return int(allowed[0]) if len(allowed) else 0


@lru_cache(maxsize=512)
def _cached_wavefunction(state: StateLabel, defects: QuantumDefectSet, grid_spec: GridSpec) -> RadialWavefunction:
    return numerov_radial(state, defects, grid_spec)


def radial_dipole_integral(w1: RadialWavefunction, w2: RadialWavefunction) -> float:
    """``int u1(r) r u2(r) dr`` in bohr."""
    s1, s2 = w1.s, w2.s
    lo, hi = max(s1[0], s2[0]), min(s1[-1], s2[-1])
    if lo >= hi:
        raise AtomicDomainError("wavefunction grids do not overlap")
    if w1.step == w2.step and abs((s1[0] - s2[0]) / w1.step - round((s1[0] - s2[0]) / w1.step)) < 1e-6:
        i1 = int(round((lo - s1[0]) / w1.step))
        i2 = int(round((lo - s2[0]) / w2.step))
        count = min(len(s1) - i1, len(s2) - i2)
        s = s1[i1 : i1 + count]
        a, b = w1.u[i1 : i1 + count], w2.u[i2 : i2 + count]
    else:
        from scipy.interpolate import CubicSpline

        h = min(w1.step, w2.step)
        s = np.arange(lo, hi, h)
        a = CubicSpline(s1, w1.u)(s)
        b = CubicSpline(s2, w2.u)(s)
    return float(_sqrt_grid_integral(s, a * b * s * s))


# ---------------------------------------------------------------------------
# Dipole matrix elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionDipole:
    """Electric-dipole coupling between two fine-structure levels.

    ``magnitude_squared`` is summed over the final magnetic sublevels and the
    three Cartesian components, for a fixed initial sublevel (averaged over
    initial sublevels for j > 1/2). ``reduced_squared`` is the symmetric
    ``|<a||d||b>|^2``.
    """

    source: StateLabel
    target: StateLabel
    reduced_radial: float  # bohr, signed
    angular_factor: float
    magnitude_squared: float  # (e a0)^2
    d2_parallel: float
    d2_perp: float

    @property
    def reduced_squared(self) -> float:
        return self.magnitude_squared * (2 * self.source.j + 1)

    @property
    def signed_magnitude(self) -> float:
        return math.copysign(math.sqrt(self.magnitude_squared), self.reduced_radial)


@lru_cache(maxsize=None)
def angular_factor(l1: int, j1: float, l2: int, j2: float) -> float:
    """``sum_{m2,q} |<l1 j1 m1|d_q|l2 j2 m2>|^2 / R^2``."""
    if abs(l1 - l2) != 1 or abs(j1 - j2) > 1:
        return 0.0
    s = 0.5
    three_j = float(wigner_3j(l1, 1, l2, 0, 0, 0))
    six_j = float(wigner_6j(l1, j1, s, j2, l2, 1))
    return (2 * j2 + 1) * (2 * l1 + 1) * (2 * l2 + 1) * (six_j * three_j) ** 2


ORIENTATIONS = {
    # fraction of |d|^2 along (x + y, z)
    "isotropic": (2.0 / 3.0, 1.0 / 3.0),
    "anisotropic": (0.5, 0.5),
}


def dipole_matrix_element(
    a: StateLabel,
    b: StateLabel,
    defects: QuantumDefectSet,
    orientation: str = "isotropic",
    grid_spec: GridSpec = GridSpec(),
) -> TransitionDipole:
    if orientation not in ORIENTATIONS:
        raise AtomicDomainError(f"unknown orientation {orientation!r}")
    ang = angular_factor(a.l, a.j, b.l, b.j)
    if ang == 0.0:
        return TransitionDipole(a, b, 0.0, 0.0, 0.0, 0.0, 0.0)
    radial = radial_dipole_integral(
        _cached_wavefunction(a, defects, grid_spec), _cached_wavefunction(b, defects, grid_spec)
    )
    d2 = ang * radial * radial
    fpar, fperp = ORIENTATIONS[orientation]
    return TransitionDipole(a, b, radial, ang, d2, fpar * d2, fperp * d2)


def to_si_dipole_squared(d2_au: float) -> float:
    """(e a0)^2 -> (C m)^2."""
    return d2_au * AU_DIPOLE**2


def select_relevant_states(
    center: StateLabel, dn_max: int, defects: QuantumDefectSet | None = None
) -> list[StateLabel]:
    """Dipole-allowed partners with ``|n' - n| <= dn_max``, by ascending energy."""
    if dn_max < 0:
        raise AtomicDomainError("dn_max must be >= 0")
    defects = defects if defects is not None else QuantumDefectSet.rubidium()
    found = set()
    for n2 in range(max(1, center.n - dn_max), center.n + dn_max + 1):
        for l2 in (center.l - 1, center.l + 1):
            if l2 < 0 or l2 >= n2:
                continue
            for j2 in (l2 - 0.5, l2 + 0.5):
                if j2 < 0 or abs(j2 - center.j) > 1:
                    continue
                found.add(StateLabel(n2, l2, j2))
    found.discard(center)
    return sorted(found, key=lambda st: (energy_level(st, defects), st))
