"""Discretized atom-field eigenproblem as a symmetric arrowhead matrix.

The head couples to every field mode ``i`` with weight ``w_i`` (the squared
coupling times the quadrature weight); eigenvalues are the zeros of the
Pick function ``f(x) = (a - x) - sum_i w_i / (d_i - x)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .response import DielectricModel, coupling_weight, surface_resonance

EPS = np.finfo(float).eps


class ArrowheadError(ValueError):
    pass


class PoleEvaluationError(ArrowheadError):
    def __init__(self, index: int):
        super().__init__(f"Pick function evaluated on pole d[{index}]")
        self.index = index


class ConditioningError(ArrowheadError):
    pass


@dataclass(frozen=True)
class ArrowheadSystem:
    a: float
    d: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    grid: np.ndarray | None = field(default=None, repr=False)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if d.ndim != 1 or d.shape != w.shape or len(d) < 1:
            raise ArrowheadError("d and w must be 1-d arrays of equal length >= 1")
        if np.any(np.diff(d) < 0):
            raise ArrowheadError("poles d must be sorted")
        if np.any(w < 0):
            raise ArrowheadError("weights w must be non-negative")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "w", w)

    @property
    def N(self) -> int:
        return len(self.d)

    @property
    def scale(self) -> float:
        return max(abs(self.a), float(np.max(np.abs(self.d))), float(np.sqrt(self.w.sum())))

    def dense(self) -> np.ndarray:
        """Symmetrized matrix with off-diagonal couplings ``sqrt(w_i)``."""
        m = np.diag(np.concatenate(([self.a], self.d)))
        m[0, 1:] = m[1:, 0] = np.sqrt(self.w)
        return m

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["index", "omega", "a", "d", "w"])
            grid = self.grid if self.grid is not None else np.full(self.N, np.nan)
            for i in range(self.N):
                out.writerow([i, f"{grid[i]:.12e}", f"{self.a:.12e}", f"{self.d[i]:.12e}", f"{self.w[i]:.12e}"])


def pick_function(sys: ArrowheadSystem, x: float) -> tuple[float, float]:
    """Value and derivative of the Pick function at ``x``."""
    gap = sys.d - x
    hit = np.nonzero(gap == 0)[0]
    if len(hit):
        raise PoleEvaluationError(int(hit[0]))
    t = sys.w / gap
    return (sys.a - x) - float(t.sum()), -1.0 - float((t / gap).sum())


@dataclass
class PickRootSet:
    roots: np.ndarray
    brackets: np.ndarray  # (M, 2) bracket per root, deflated roots have zero width
    deflated: np.ndarray  # bool per root
    residuals: np.ndarray  # scaled backward error |f| / (|a| + |x| + sum |w/(d-x)|)

    def __len__(self):
        return len(self.roots)


def _deflate(sys: ArrowheadSystem):
    """Remove decoupled and repeated poles; returns reduced (d, w) and exact eigenvalues."""
    tiny = (EPS * sys.scale) ** 2
    exact = []
    d_red, w_red = [], []
    for di, wi in zip(sys.d, sys.w):
        if wi <= tiny:
            exact.append(di)
            continue
        if d_red and di - d_red[-1] <= 4 * EPS * max(abs(di), abs(d_red[-1])):
            # merged poles keep the spectrum: one copy survives with the summed weight
            w_red[-1] += wi
            exact.append(di)
            continue
        d_red.append(di)
        w_red.append(wi)
    return np.array(d_red), np.array(w_red), exact


def _solve_intervals(a: float, d: np.ndarray, w: np.ndarray, which: np.ndarray, chunk: int = 512):
    """Roots of the reduced Pick function in intervals ``which`` (0 = below d[0]).

    Each root is represented as ``origin + tau`` relative to its nearest pole
    so that ``d_j - x`` is formed without cancellation.
    """
    m = len(d)
    sw = np.sqrt(w)
    lo_bound = min(a - sw.sum(), float(np.min(d - sw))) - 1.0 * max(abs(a), 1.0) * EPS
    hi_bound = max(a + sw.sum(), float(np.max(d + sw))) + 1.0 * max(abs(a), 1.0) * EPS
    roots = np.empty(len(which))
    taus = np.empty(len(which))
    origins = np.empty(len(which))
    brackets = np.empty((len(which), 2))
    for start in range(0, len(which), chunk):
        idx = which[start : start + chunk]
        left = np.where(idx == 0, lo_bound, d[np.maximum(idx - 1, 0)])
        right = np.where(idx == m, hi_bound, d[np.minimum(idx, m - 1)])
        # origin at the nearer pole, decided by the sign at the midpoint
        mid = 0.5 * (left + right)
        fmid = a - mid - (w[None, :] / (d[None, :] - mid[:, None])).sum(axis=1)
        use_right = np.where(idx == 0, True, np.where(idx == m, False, fmid > 0))
        origin_idx = np.where(use_right, np.minimum(idx, m - 1), np.maximum(idx - 1, 0))
        origin = d[origin_idx]
        lo = left - origin
        hi = right - origin
        # the end brackets are closed on the far side; poles are open
        dd = d[None, :] - origin[:, None]
        a_shift = a - origin

        def f_and_df(tau):
            gap = dd - tau[:, None]
            t = w[None, :] / gap
            f = a_shift - tau - t.sum(axis=1)
            df = -1.0 - (t / gap).sum(axis=1)
            den = np.abs(a_shift) + np.abs(tau) + np.abs(t).sum(axis=1)
            return f, df, den

        tau = 0.5 * (lo + hi)
        for _ in range(12):  # plain bisection to ~1e-3 of the bracket
            f, _df, _ = f_and_df(tau)
            pos = f > 0
            lo = np.where(pos, tau, lo)
            hi = np.where(pos, hi, tau)
            tau = 0.5 * (lo + hi)
        active = np.ones(len(idx), dtype=bool)
        for _ in range(200):
            f, df, den = f_and_df(tau)
            pos = f > 0
            lo = np.where(pos, tau, lo)
            hi = np.where(pos, hi, tau)
            step = -f / df
            newton = tau + step
            ok = (newton > lo) & (newton < hi) & np.isfinite(newton)
            new_tau = np.where(f == 0, tau, np.where(ok, newton, 0.5 * (lo + hi)))
            tol = 2 * EPS * np.maximum(np.abs(new_tau), EPS * np.abs(origin))
            done = (np.abs(new_tau - tau) <= tol) | (hi - lo <= tol) | (f == 0)
            tau = np.where(active, new_tau, tau)
            active &= ~done
            if not active.any():
                break
        sl = slice(start, start + len(idx))
        taus[sl] = tau
        origins[sl] = origin
        roots[sl] = origin + tau
        brackets[sl, 0] = origin + lo
        brackets[sl, 1] = origin + hi
    return roots, origins, taus, brackets


def find_pick_roots(sys: ArrowheadSystem) -> PickRootSet:
    """All ``N + 1`` eigenvalues, one per pole-bracketed interval."""
    d, w, exact = _deflate(sys)
    m = len(d)
    if m == 0:
        found = np.array([sys.a])
        br = np.array([[sys.a, sys.a]])
        res = np.zeros(1)
    else:
        which = np.arange(m + 1)
        found, origins, taus, br = _solve_intervals(sys.a, d, w, which)
        gap = (d[None, :] - origins[:, None]) - taus[:, None]
        t = w[None, :] / gap
        f = (sys.a - origins - taus) - t.sum(axis=1)
        res = np.abs(f) / (abs(sys.a) + np.abs(found) + np.abs(t).sum(axis=1))
        if not (np.all(found[:-1] < d) and np.all(d < found[1:])):
            raise ArrowheadError("interlacing violated; roots not strictly separated by poles")
    ex = np.array(exact, dtype=float)
    roots = np.concatenate((found, ex))
    brackets = np.concatenate((br, np.column_stack((ex, ex)))) if len(ex) else br
    deflated = np.concatenate((np.zeros(len(found), bool), np.ones(len(ex), bool)))
    residuals = np.concatenate((res, np.zeros(len(ex))))
    order = np.argsort(roots, kind="stable")
    return PickRootSet(roots[order], brackets[order], deflated[order], residuals[order])


def lowest_pick_root(sys: ArrowheadSystem) -> float:
    d, w, exact = _deflate(sys)
    if len(d) == 0:
        return min([sys.a] + exact)
    root = _solve_intervals(sys.a, d, w, np.array([0]))[0][0]
    return min([root] + exact)


def eigenvector(sys: ArrowheadSystem, root: float) -> np.ndarray:
    """Unit eigenvector ``x / |x|`` with ``x = [1, -sqrt(w_i)/(d_i - root)]``."""
    gap = sys.d - root
    limit = 1e-13 * max(abs(sys.d[-1]), EPS)
    coupled = sys.w > 0
    if np.any(np.abs(gap[coupled]) < limit):
        raise ConditioningError("root lies within 1e-13 d_N of a coupled pole")
    x = np.empty(sys.N + 1)
    x[0] = 1.0
    x[1:] = np.where(coupled, -np.sqrt(sys.w) / np.where(coupled, gap, 1.0), 0.0)
    return x / np.linalg.norm(x)


# ---------------------------------------------------------------------------
# Independent dense eigensolver (verification path)
# ---------------------------------------------------------------------------


def _tridiagonalize(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction of a symmetric matrix to (diagonal, off-diagonal)."""
    a = np.array(mat, dtype=float)
    n = len(a)
    off = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            off[k] = 0.0
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[k + 1 :, k + 1 :]
        p = sub @ v
        q = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        off[k] = alpha
    if n >= 2:
        off[n - 2] = a[n - 1, n - 2]
    return np.diag(a).copy(), off


def _sturm_count(diag: np.ndarray, off2: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each entry of ``x``."""
    tiny = EPS * (np.max(np.abs(diag)) + 1e-300)
    q = diag[0] - x
    count = (q < 0).astype(int)
    for i in range(1, len(diag)):
        q = np.where(q == 0, tiny, q)
        q = (diag[i] - x) - off2[i - 1] / q
        count += q < 0
    return count


def dense_oracle(sys: ArrowheadSystem) -> np.ndarray:
    """Sorted eigenvalues by tridiagonalization and Sturm-sequence bisection."""
    if sys.N > 5000:
        raise ArrowheadError("dense oracle limited to N <= 5000")
    diag, off = _tridiagonalize(sys.dense())
    n = len(diag)
    if n == 1:
        return diag.copy()
    off2 = off * off
    radius = np.abs(np.concatenate((off, [0.0]))) + np.abs(np.concatenate(([0.0], off)))
    lo = np.full(n, np.min(diag - radius))
    hi = np.full(n, np.max(diag + radius))
    target = np.arange(n)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = _sturm_count(diag, off2, mid)
        # eigenvalue k lies below mid iff more than k eigenvalues are below mid
        go_left = below > target
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
        if np.all(hi - lo <= 2 * EPS * np.maximum(np.abs(lo), np.abs(hi))):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Discretization of the continuum
# ---------------------------------------------------------------------------


def frequency_grid(omega_min: float, omega_max: float, n: int, kind: str = "log", anchor: float | None = None):
    """Nodes and trapezoidal weights on a uniform or logarithmic grid.

    For ``kind="log"`` the weights are trapezoidal in ``ln(omega)``; when
    ``anchor`` falls inside the range the grid is shifted by less than one
    step so that ``anchor`` is a node.
    """
    if n < 1 or omega_max <= 0 or omega_min <= 0 or omega_min >= omega_max:
        raise ArrowheadError("need n >= 1 and 0 < omega_min < omega_max")
    if n == 1:
        return np.array([omega_max]), np.array([omega_max - omega_min])
    if kind == "uniform":
        nodes = np.linspace(omega_min, omega_max, n)
        h = nodes[1] - nodes[0]
        wts = np.full(n, h)
    elif kind == "log":
        u0, u1 = math.log(omega_min), math.log(omega_max)
        h = (u1 - u0) / (n - 1)
        if anchor is not None and omega_min < anchor < omega_max:
            u0 += (math.log(anchor) - u0) - h * round((math.log(anchor) - u0) / h)
        nodes = np.exp(u0 + h * np.arange(n))
        wts = nodes * h
    else:
        raise ArrowheadError(f"unknown grid kind {kind!r}")
    wts[0] *= 0.5
    wts[-1] *= 0.5
    return nodes, wts


def build_discretized_system(
    channel,
    model: DielectricModel,
    z: float,
    omega_max: float,
    N: int,
    grid: str = "log",
    omega_min: float | None = None,
    omega_0: float = 0.0,
) -> ArrowheadSystem:
    """Two-level system: head ``omega_0``, poles ``omega_i + omega_1``.

    ``channel`` supplies ``omega_kn`` (the upward transition frequency) and
    the squared dipole components.
    """
    if N < 1 or omega_max <= 0 or z <= 0:
        raise ArrowheadError("need N >= 1, omega_max > 0 and z > 0")
    omega_a = channel.omega_kn
    notes = []
    if omega_max <= abs(omega_a):
        notes.append(f"omega_max={omega_max:.3e} below transition frequency {abs(omega_a):.3e}: coverage insufficient")
    if omega_min is None:
        omega_min = min(1e-3 * abs(omega_a), 1e-6 * omega_max)
    anchor = surface_resonance(model) if grid == "log" else None
    nodes, wts = frequency_grid(omega_min, omega_max, N, grid, anchor)
    g2 = coupling_weight(channel.d2_parallel, channel.d2_perp, model, z, nodes)
    return ArrowheadSystem(omega_0, nodes + omega_0 + omega_a, wts * g2, nodes, tuple(notes))
