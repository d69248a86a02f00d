"""Solution strategies.

Each ``SchemeId`` maps to one driver; ``advance`` checks the static
compatibility table, picks a default time step when none is given, and
integrates to ``problem.t_end``.

Families
--------
uniform upwind        ConUniformUpwind, TransUniformUpwind (unsplit), and the
                      split variants SplitConUniformUpwind, SplitTransUniformUpwind
nonuniform upwind     ConNonuniformUpwind, TransNonuniformUpwind (unsplit, on a
                      backward-marched grid), SplitTransNonuniformUpwind (jagged)
exact shifts          ExactAnalytical, ExactNumerical, ExactInterpolation, MuExact,
                      SplitNonhomogeneous (shift + Euler source)
coupled splitting     SplitExact (jagged characteristic rows), SplitExactEnhanced
                      (closed-form feet on one grid)

Exact-shift lattices: along axis i the scheme works in
``a_tilde_i = int_0^a da/S_i`` where ``S_i`` is the size factor of the growth
rate.  A uniform lattice of spacing ``h_i = t_tilde_i(t_end) / K_i`` is laid
backwards from ``a_tilde_i(L_i)`` (``K_i`` is the smallest shift count giving
at least the requested number of nodes) and mapped back to physical nodes.
After physical time ``t`` the solution has moved ``round(t_tilde_i(t)/h_i)``
lattice nodes, so the final field is exact whatever ``dt`` was used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (Axis1D, Constant, Coupled, Field2D, GeneralSource, Grid2D, GrowthSpec,
                   JaggedMesh, JaggedRow, LinearSink, PerAxis, ProblemSpec, stable_dt_split,
                   stable_dt_unsplit, _evaluate)
from .errors import CompatibilityError, EvaluationError, SetupError, StabilityError
from .interp import AxisResampler, Resampler
from .kernels import _CFL_TOL, shift_axis, upwind_step_2d_unsplit
from .mesh import (MeshBuildReport, backward_march, build_characteristic_rows, build_uniform,
                   lattice_backward, lattice_steps)
from .transform import DEFAULT_PANELS, MonotoneMap, advective_scale, make_mu

Resolution = Union[int, Tuple[int, int]]


class SchemeId(enum.Enum):
    ConUniformUpwind = "con-uniform-upwind"
    TransUniformUpwind = "trans-uniform-upwind"
    ConNonuniformUpwind = "con-nonuniform-upwind"
    TransNonuniformUpwind = "trans-nonuniform-upwind"
    ExactAnalytical = "exact-analytical"
    ExactNumerical = "exact-numerical"
    ExactInterpolation = "exact-interpolation"
    SplitConUniformUpwind = "split-con-uniform-upwind"
    SplitTransUniformUpwind = "split-trans-uniform-upwind"
    SplitTransNonuniformUpwind = "split-trans-nonuniform-upwind"
    SplitExact = "split-exact"
    SplitExactEnhanced = "split-exact-enhanced"
    SplitNonhomogeneous = "split-nonhomogeneous"
    MuExact = "mu-exact"

    @classmethod
    def parse(cls, value: Union[str, "SchemeId"]) -> "SchemeId":
        if isinstance(value, SchemeId):
            return value
        for s in cls:
            if value in (s.value, s.name):
                return s
        raise SetupError(f"unknown scheme {value!r}; known: {', '.join(s.value for s in cls)}")


_COMMUTING = {"constant", "per-axis", "time", "separable-time-size"}
_ALL_GROWTH = _COMMUTING | {"coupled"}

# scheme -> (growth kinds, source kinds)
COMPATIBILITY: Dict[SchemeId, Tuple[frozenset, frozenset]] = {
    SchemeId.ConUniformUpwind: (frozenset(_ALL_GROWTH), frozenset({"none"})),
    SchemeId.TransUniformUpwind: (frozenset(_COMMUTING), frozenset({"none"})),
    SchemeId.ConNonuniformUpwind: (frozenset({"constant", "per-axis"}), frozenset({"none"})),
    SchemeId.TransNonuniformUpwind: (frozenset({"constant", "per-axis"}), frozenset({"none"})),
    SchemeId.ExactAnalytical: (frozenset(_COMMUTING), frozenset({"none"})),
    SchemeId.ExactNumerical: (frozenset(_COMMUTING), frozenset({"none"})),
    SchemeId.ExactInterpolation: (frozenset(_COMMUTING), frozenset({"none"})),
    SchemeId.SplitConUniformUpwind: (frozenset(_ALL_GROWTH), frozenset({"none"})),
    SchemeId.SplitTransUniformUpwind: (frozenset(_ALL_GROWTH), frozenset({"none"})),
    SchemeId.SplitTransNonuniformUpwind: (frozenset({"coupled"}), frozenset({"none"})),
    SchemeId.SplitExact: (frozenset({"coupled"}), frozenset({"none"})),
    SchemeId.SplitExactEnhanced: (frozenset({"coupled"}), frozenset({"none"})),
    SchemeId.SplitNonhomogeneous: (frozenset(_COMMUTING), frozenset({"none", "general", "linear-sink"})),
    SchemeId.MuExact: (frozenset({"constant"}), frozenset({"linear-sink"})),
}


# extra keyword options per scheme (``order`` is accepted by all)
OPTIONS: Dict[SchemeId, set] = {s: set() for s in SchemeId}
OPTIONS[SchemeId.ConNonuniformUpwind] = {"gamma"}
OPTIONS[SchemeId.TransNonuniformUpwind] = {"gamma"}
OPTIONS[SchemeId.SplitTransNonuniformUpwind] = {"interp_order"}
OPTIONS[SchemeId.ExactAnalytical] = {"n_panels"}
OPTIONS[SchemeId.ExactNumerical] = {"n_panels"}
OPTIONS[SchemeId.ExactInterpolation] = {"n_panels"}
OPTIONS[SchemeId.SplitExact] = {"interp_order", "n_panels"}
OPTIONS[SchemeId.SplitExactEnhanced] = {"interp_order"}
OPTIONS[SchemeId.SplitNonhomogeneous] = {"provenance", "n_panels", "source_order"}
OPTIONS[SchemeId.MuExact] = {"n_panels"}


def check_compatible(problem: ProblemSpec, scheme: SchemeId) -> None:
    growth_ok, source_ok = COMPATIBILITY[scheme]
    g, s = problem.growth.kind, problem.source.kind
    if g not in growth_ok or s not in source_ok:
        raise CompatibilityError(f"scheme {scheme.value} cannot solve growth={g}, source={s} "
                                 f"(supports growth {sorted(growth_ok)}, source {sorted(source_ok)})")
    if scheme is SchemeId.SplitExactEnhanced and (problem.growth.foot1 is None or problem.growth.foot2 is None):
        raise CompatibilityError(f"scheme {scheme.value} needs closed-form characteristic feet "
                                 "(foot1 and foot2) on the coupled growth")


@dataclass
class RunResult:
    final_field: Field2D
    steps_taken: int
    dt_used: float
    mesh_report: MeshBuildReport


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _resolution(resolution: Resolution) -> Tuple[int, int]:
    if isinstance(resolution, (int, np.integer)):
        n1 = n2 = int(resolution)
    else:
        n1, n2 = (int(v) for v in resolution)
    if n1 < 2 or n2 < 2:
        raise SetupError(f"resolution must be >= 2 per axis, got {(n1, n2)}")
    return n1, n2


def _step_sizes(t_end: float, dt: float, exact_multiple: bool) -> np.ndarray:
    """Step sizes reaching ``t_end``; the last one is truncated when allowed."""
    if not (dt > 0 and np.isfinite(dt)):
        raise SetupError(f"dt must be positive, got {dt}")
    n = int(round(t_end / dt))
    if n >= 1 and abs(n * dt - t_end) <= 1e-9 * max(1.0, t_end):
        return np.full(n, t_end / n)
    if exact_multiple:
        raise SetupError(f"this scheme moves whole nodes per step: t_end={t_end:g} must be an "
                         f"integer multiple of dt={dt:g}")
    n = int(math.floor(t_end / dt))
    steps = np.full(n, float(dt))
    rest = t_end - n * dt
    return np.append(steps, rest) if rest > 0 else steps


def _dividing_dt(t_end: float, dt_max: float) -> float:
    """Largest ``dt <= dt_max`` dividing ``t_end`` evenly."""
    return t_end / max(1, math.ceil(t_end / dt_max - 1e-9))


def lie_split_step(values: np.ndarray, dt: float, per_axis_solver: Callable, order=(1, 2)) -> np.ndarray:
    """First-order splitting: solve along ``order[0]`` for ``dt``, then along ``order[1]``."""
    if tuple(order) not in ((1, 2), (2, 1)):
        raise SetupError(f"axis order must be (1, 2) or (2, 1), got {order}")
    for axis in order:
        values = per_axis_solver(values, axis, dt)
    return values


def _rates(growth: GrowthSpec, t: float, A1, A2):
    return growth.rates(t, A1, A2)


def _spacings(points: np.ndarray) -> np.ndarray:
    """Backward spacing per node; node 0 uses the first cell (ghost at -da_1)."""
    d = np.diff(points)
    return np.concatenate([[d[0]], d])


# ---------------------------------------------------------------------------
# uniform-grid upwind schemes
# ---------------------------------------------------------------------------

def _unsplit_uniform(problem: ProblemSpec, n1: int, n2: int, dt: Optional[float], conservative: bool):
    grid = build_uniform(problem.domain, n1, n2)
    da1 = problem.domain[0] / (n1 - 1)
    da2 = problem.domain[1] / (n2 - 1)
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_unsplit(problem.growth, da1, da2, problem.domain,
                                                           problem.t_end))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=False)
    A1, A2 = grid.mesh()
    growth = problem.growth
    f = problem.f0(A1, A2)
    v = problem.boundary.inflow_value
    scale = None if conservative else advective_scale(growth, A1, A2, "both")
    if scale is not None:
        f = f * scale
    t = 0.0
    for h in steps:
        G1, G2 = _rates(growth, t, A1, A2)
        alpha, beta = G1 * h / da1, G2 * h / da2
        if np.any(alpha + beta > 1.0 + _CFL_TOL):
            raise StabilityError(f"unsplit step unstable: max(alpha+beta)={np.max(alpha + beta):.6g} "
                                 f"at dt={h:g}")
        if conservative:
            q1 = G1 * f
            q2 = G2 * f
            f = f - h / da1 * (q1 - shift_axis(q1, 1, 1, v)) - h / da2 * (q2 - shift_axis(q2, 2, 1, v))
        else:
            f = upwind_step_2d_unsplit(Field2D(grid, f), alpha, beta, problem.boundary).values
        t += h
    if scale is not None:
        f = f / scale
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


def _split_uniform(problem: ProblemSpec, n1: int, n2: int, dt: Optional[float], conservative: bool,
                   order=(1, 2)):
    grid = build_uniform(problem.domain, n1, n2)
    da = (problem.domain[0] / (n1 - 1), problem.domain[1] / (n2 - 1))
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_split(problem.growth, da[0], da[1], problem.domain,
                                                         problem.t_end))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=False)
    A1, A2 = grid.mesh()
    growth = problem.growth
    v = problem.boundary.inflow_value
    coupled = isinstance(growth, Coupled)
    f = problem.f0(A1, A2)
    clock = {"t": 0.0}

    def solve(values, axis, h):
        G = _rates(growth, clock["t"], A1, A2)[axis - 1]
        c = G * h / da[axis - 1]
        if np.any(c > 1.0 + _CFL_TOL):
            raise StabilityError(f"split sweep along a{axis} unstable: max CFL {c.max():.6g} at dt={h:g}")
        if conservative:
            q = G * values
            return values - h / da[axis - 1] * (q - shift_axis(q, axis, 1, v))
        # advective form of the sub-problem: scale by the rate of this axis only
        s = G if coupled else advective_scale(growth, A1, A2, axis)
        fh = s * values
        fh = fh - np.minimum(c, 1.0) * (fh - shift_axis(fh, axis, 1, v))
        return fh / s

    for h in steps:
        f = lie_split_step(f, h, solve, order)
        clock["t"] += h
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


# ---------------------------------------------------------------------------
# nonuniform-grid upwind schemes
# ---------------------------------------------------------------------------

def _absorbing_axis(step, L):
    """Backward march whose last (short) gap is merged into the first cell.

    Upwind stepping needs a first cell at least as long as the nominal one,
    otherwise the boundary node sees a Courant number above the interior value.
    """
    pts = backward_march(step, L, "prepend-zero")
    if pts.size > 2:
        pts = np.delete(pts, 1)
    return pts


def _nonuniform_upwind(problem: ProblemSpec, n1: int, n2: int, dt: Optional[float], conservative: bool,
                       gamma: float = 0.5):
    """Unsplit upwind on a grid marched with ``gamma G1 dt_m`` / ``(1-gamma) G2 dt_m``.

    The run uses ``dt = gamma (1 - gamma) dt_m`` so that interior Courant
    numbers are ``alpha = 1 - gamma`` and ``beta = gamma``: ``alpha + beta = 1``
    at every interior node, the largest step the unsplit update allows.
    """
    if not 0.0 < gamma < 1.0:
        raise SetupError("the unsplit nonuniform schemes need 0 < gamma < 1")
    growth = problem.growth
    L1, L2 = problem.domain
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_unsplit(growth, L1 / (n1 - 1), L2 / (n2 - 1),
                                                           problem.domain))
    dt_mesh = dt / (gamma * (1.0 - gamma))
    ax1 = _absorbing_axis(lambda a: gamma * float(growth.size_factor(1, a)) * dt_mesh, L1)
    ax2 = _absorbing_axis(lambda a: (1.0 - gamma) * float(growth.size_factor(2, a)) * dt_mesh, L2)
    grid = Grid2D(Axis1D(ax1), Axis1D(ax2))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=False)
    A1, A2 = grid.mesh()
    d1 = _spacings(ax1)[None, :]
    d2 = _spacings(ax2)[:, None]
    v = problem.boundary.inflow_value
    f = problem.f0(A1, A2)
    G1, G2 = growth.rates(0.0, A1, A2)
    scale = None if conservative else advective_scale(growth, A1, A2, "both")
    if scale is not None:
        f = f * scale
    for h in steps:
        alpha, beta = G1 * h / d1, G2 * h / d2
        if np.any(alpha + beta > 1.0 + 1e-9):
            raise StabilityError(f"nonuniform step unstable: max(alpha+beta)={np.max(alpha + beta):.6g}")
        if conservative:
            q1, q2 = G1 * f, G2 * f
            f = f - h / d1 * (q1 - shift_axis(q1, 1, 1, v)) - h / d2 * (q2 - shift_axis(q2, 2, 1, v))
        else:
            f = upwind_step_2d_unsplit(Field2D(grid, f), alpha, beta, problem.boundary).values
    if scale is not None:
        f = f / scale
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


class _RowShift:
    """Gather plan moving every row of a jagged mesh ``k_r`` nodes downstream.

    ``short[r]`` marks rows whose first cell is shorter than the lattice
    spacing; on those the boundary node is not a lattice point, so nodes
    whose source would be that node receive the inflow value instead.
    """

    def __init__(self, row_lengths, shifts, short):
        src = []
        for n, k, s in zip(row_lengths, shifts, short):
            j = np.arange(n) - int(k)
            j[j < (1 if s else 0)] = -1
            src.append(j)
        off = np.concatenate([[0], np.cumsum(row_lengths)])
        self.src = np.concatenate([np.where(j >= 0, j + off[r], -1) for r, j in enumerate(src)])
        self.valid = self.src >= 0
        self.src_clipped = np.where(self.valid, self.src, 0)

    def __call__(self, flat, inflow=0.0):
        return np.where(self.valid, flat[self.src_clipped], inflow)


def _split_trans_nonuniform(problem: ProblemSpec, n1: int, n2: int, dt: Optional[float], order=(1, 2),
                            interp_order: int = 1):
    """Jagged per-sub-problem meshes marched with ``dt G_i``; advective upwind sweeps
    (Courant number 1 at interior nodes) and resampling between the meshes each step."""
    growth = problem.growth
    L1, L2 = problem.domain
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_split(growth, L1 / (n1 - 1), L2 / (n2 - 1), problem.domain))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=False)

    def rows_for(axis):
        G = lambda a1, a2: growth.rates(0.0, np.asarray(a1), np.asarray(a2))[axis - 1]
        if axis == 1:
            anchors = _absorbing_axis(lambda b: dt * float(G(L1, b)), L2)
            lines = [_absorbing_axis(lambda a, b=b: dt * float(G(a, b)), L1) for b in anchors]
        else:
            anchors = _absorbing_axis(lambda b: dt * float(G(b, L2)), L1)
            lines = [_absorbing_axis(lambda a, b=b: dt * float(G(b, a)), L2) for b in anchors]
        return JaggedMesh(tuple(JaggedRow(float(b), Axis1D(x)) for b, x in zip(anchors, lines)), axis)

    meshes = {1: rows_for(1), 2: rows_for(2)}
    info = {}
    for axis, m in meshes.items():
        a1, a2 = m.coords()
        G = growth.rates(0.0, a1, a2)[axis - 1]
        d = np.concatenate([_spacings(r.line.points) for r in m.rows])
        info[axis] = (G, d, np.concatenate([[0], np.cumsum(m.row_lengths)]))
    first, second = order
    to_second = Resampler(meshes[first], meshes[second], interp_order)
    to_first = Resampler(meshes[second], meshes[first], interp_order)
    out_grid = build_uniform(problem.domain, n1, n2)
    to_out = Resampler(meshes[second], out_grid, interp_order)
    v = problem.boundary.inflow_value

    def sweep(flat, axis, h):
        G, d, off = info[axis]
        c = G * h / d
        if np.any(c > 1.0 + 1e-9):
            raise StabilityError(f"jagged sweep along a{axis} unstable: max CFL {c.max():.6g}")
        c = np.minimum(c, 1.0)
        fh = G * flat
        up = np.empty_like(fh)
        up[1:] = fh[:-1]
        up[off[:-1]] = v
        fh = np.where(c == 1.0, up, fh - c * (fh - up))
        return fh / G

    a1, a2 = meshes[first].coords()
    f = problem.f0(a1, a2)
    for i, h in enumerate(steps):
        f = sweep(f, first, h)
        f = to_second(f)
        f = sweep(f, second, h)
        if i < len(steps) - 1:
            f = to_first(f)
    if len(steps) == 0:
        f = to_second(f)
    field = Field2D(out_grid, to_out(f))
    return RunResult(field, len(steps), float(dt), MeshBuildReport.of(meshes[first]))


# ---------------------------------------------------------------------------
# exact shift schemes
# ---------------------------------------------------------------------------

@dataclass
class _ShiftAxis:
    nodes: np.ndarray
    lattice: Optional[np.ndarray]
    h: float
    short: bool
    size_map: Optional[MonotoneMap]
    time_total: float
    time_map: Optional[Callable]
    K: int

    def count(self, t: float) -> int:
        if self.K == 0:
            return 0
        return int(round(float(self.time_map(t)) / self.h))


def _time_factor_map(growth: GrowthSpec, axis: int, t_end: float, provenance: str, n_panels: int):
    """``(t -> t_tilde(t), t_tilde(t_end))`` for one axis."""
    if isinstance(growth, Constant):
        g = growth.g1 if axis == 1 else growth.g2
        return (lambda t: g * t), g * t_end
    if isinstance(growth, PerAxis):
        return (lambda t: t), t_end
    closed = growth.time_closed_form(axis)
    if provenance == "analytical" and closed is None:
        raise CompatibilityError("exact-analytical needs a closed-form time map for time-dependent growth")
    if closed is not None and provenance != "quadrature":
        fwd = closed.forward
        return (lambda t: float(fwd(np.asarray(t)))), float(fwd(np.asarray(t_end)))
    m = MonotoneMap(lambda t: growth.time_factor(axis, t), t_end, None, n_panels)
    return (lambda t: float(m.forward(t)) if t > 0 else 0.0), m.total


def _size_map(growth: GrowthSpec, axis: int, L: float, provenance: str, n_panels: int) -> MonotoneMap:
    closed = growth.size_closed_form(axis)
    if provenance == "analytical" and closed is None:
        raise CompatibilityError("exact-analytical needs closed-form coordinate maps "
                                 "(int_0^a da/G) for both axes; use exact-numerical instead")
    if provenance == "quadrature":
        closed = None
    return MonotoneMap(lambda a: 1.0 / growth.size_factor(axis, a), L, closed, n_panels)


def _build_shift_axis(growth, axis, L, n, t_end, provenance, n_panels, per_step: Optional[float] = None):
    time_map, time_total = _time_factor_map(growth, axis, t_end, provenance, n_panels)
    smap = _size_map(growth, axis, L, provenance, n_panels)
    total = smap.total
    if time_total <= 0:
        return _ShiftAxis(np.linspace(0.0, L, n), None, 0.0, False, smap, 0.0, time_map, 0)
    K = lattice_steps(total, n, time_total)
    h = time_total / K
    lat = lattice_backward(total, h)
    nodes = smap.inverse(lat)
    nodes[0] = 0.0
    nodes[-1] = L
    short = lat.size > 1 and (lat[1] - lat[0]) < h * (1.0 - 1e-9)
    return _ShiftAxis(nodes, lat, h, bool(short), smap, time_total, time_map, K)


def _shift(values, ax: _ShiftAxis, axis: int, k: int, inflow: float):
    if k == 0:
        return values
    out = shift_axis(values, axis, k, inflow)
    if ax.short:
        sl = [slice(None), slice(None)]
        sl[1 if axis == 1 else 0] = slice(0, min(k + 1, values.shape[1 if axis == 1 else 0]))
        out[tuple(sl)] = inflow
    return out


class _Interpolating:
    """Replaces each lattice shift with a linear interpolation at the foot."""

    def __init__(self, ax: _ShiftAxis, axis: int, shape, inflow: float):
        self.ax, self.axis, self.shape, self.inflow = ax, axis, shape, inflow
        self._cache = {}

    def __call__(self, values, k):
        if k == 0:
            return values
        r = self._cache.get(k)
        if r is None:
            ax = self.ax
            foot_lat = ax.lattice - k * ax.h
            foot = np.where(foot_lat >= -1e-9 * ax.h, ax.size_map.inverse(np.maximum(foot_lat, 0.0)), -1.0)
            if ax.short:
                foot = np.where(foot_lat < ax.lattice[1] - 1e-9 * ax.h, -1.0, foot)
            foot[foot_lat < -1e-9 * ax.h] = -1.0
            q = np.broadcast_to(foot[None, :] if self.axis == 1 else foot[:, None], self.shape)
            r = AxisResampler(ax.nodes, q, self.axis, order=1, below=self.inflow)
            self._cache[k] = r
        return r(values)


def _exact_setup(problem: ProblemSpec, n1, n2, provenance, n_panels):
    growth = problem.growth
    L1, L2 = problem.domain
    axes = {1: _build_shift_axis(growth, 1, L1, n1, problem.t_end, provenance, n_panels),
            2: _build_shift_axis(growth, 2, L2, n2, problem.t_end, provenance, n_panels)}
    grid = Grid2D(Axis1D(axes[1].nodes), Axis1D(axes[2].nodes))
    return axes, grid


def _default_exact_dt(problem, axes):
    K = max(axes[1].K, axes[2].K, 1)
    return problem.t_end / K


def _exact_shift(problem: ProblemSpec, n1, n2, dt, provenance: str, n_panels: int = DEFAULT_PANELS,
                 interpolate: bool = False, order=(1, 2), mu=None):
    axes, grid = _exact_setup(problem, n1, n2, provenance, n_panels)
    if dt is None:
        dt = _default_exact_dt(problem, axes)
    steps = _step_sizes(problem.t_end, dt, exact_multiple=True)
    A1, A2 = grid.mesh()
    growth = problem.growth
    v = problem.boundary.inflow_value
    scale = advective_scale(growth, A1, A2, "both")
    fh = problem.f0(A1, A2) * scale
    if mu is not None:
        fh = fh * mu(np.zeros_like(A1), A1, A2)
    movers = {i: _Interpolating(axes[i], i, grid.shape, v) for i in (1, 2)} if interpolate else None
    done = {1: 0, 2: 0}
    t = 0.0
    for h in steps:
        t += h
        for i in order:
            c = axes[i].count(t)
            k = c - done[i]
            done[i] = c
            fh = movers[i](fh, k) if interpolate else _shift(fh, axes[i], i, k, v)
    f = fh / scale
    if mu is not None:
        f = f / mu(np.full_like(A1, problem.t_end), A1, A2)
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


def _split_nonhomogeneous(problem: ProblemSpec, n1, n2, dt, provenance="auto", n_panels=DEFAULT_PANELS,
                          source_order: str = "advection-first", order=(1, 2)):
    """Exact lattice shifts for the advection, forward Euler for the right-hand side."""
    if source_order not in ("advection-first", "source-first"):
        raise SetupError(f"source_order must be 'advection-first' or 'source-first', got {source_order!r}")
    growth = problem.growth
    if provenance == "auto":
        provenance = "analytical" if _has_closed_forms(growth) else "quadrature"
    axes, grid = _exact_setup(problem, n1, n2, provenance, n_panels)
    if dt is None:
        dt = _default_exact_dt(problem, axes)
    steps = _step_sizes(problem.t_end, dt, exact_multiple=True)
    A1, A2 = grid.mesh()
    v = problem.boundary.inflow_value
    scale = advective_scale(growth, A1, A2, "both")
    src = problem.source
    f = problem.f0(A1, A2)

    def source_step(f, t, h):
        if isinstance(src, GeneralSource):
            rhs = _evaluate(src.h, np.full_like(A1, t), A1, A2)
        elif isinstance(src, LinearSink):
            rhs = -_evaluate(src.lam, np.full_like(A1, t), A1, A2) * f
        else:
            return f
        if not np.all(np.isfinite(rhs)):
            raise EvaluationError(f"source returned non-finite values at t={t:g}")
        return f + h * rhs

    done = {1: 0, 2: 0}
    t = 0.0
    for h in steps:
        if source_order == "source-first":
            f = source_step(f, t, h)
        fh = f * scale
        for i in order:
            c = axes[i].count(t + h)
            fh = _shift(fh, axes[i], i, c - done[i], v)
            done[i] = c
        f = fh / scale
        if source_order == "advection-first":
            f = source_step(f, t, h)
        t += h
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


def _has_closed_forms(growth: GrowthSpec) -> bool:
    if isinstance(growth, Constant):
        return True
    ok = all(growth.size_closed_form(i) is not None for i in (1, 2))
    if growth.time_dependent:
        ok = ok and all(growth.time_closed_form(i) is not None for i in (1, 2))
    return ok


def _mu_exact(problem: ProblemSpec, n1, n2, dt, n_panels=None, order=(1, 2)):
    g = problem.growth
    mu = make_mu(problem.source, g.g1, g.g2, **({} if n_panels is None else {"n_panels": n_panels}))
    return _exact_shift(problem, n1, n2, dt, "analytical", order=order, mu=mu)


# ---------------------------------------------------------------------------
# coupled growth: split exact schemes
# ---------------------------------------------------------------------------

def _split_exact(problem: ProblemSpec, n1, n2, dt, order=(1, 2), interp_order: int = 3,
                 n_panels: int = DEFAULT_PANELS):
    """Lie splitting with an exact CFL=1 shift per sub-problem.

    Sub-problem i is advanced in ``f_hat = G_i f`` on jagged rows whose
    nodes are uniform in the row's own ``int da_i / G_i`` (anchor frozen),
    so ``dt`` is an exact integer number of node moves per row.  The solution
    is resampled between the two row families every sub-step and onto the
    uniform ``n1 x n2`` grid at the end.
    """
    if tuple(order) not in ((1, 2), (2, 1)):
        raise SetupError(f"axis order must be (1, 2) or (2, 1), got {order}")
    growth = problem.growth
    L1, L2 = problem.domain
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_split(growth, L1 / (n1 - 1), L2 / (n2 - 1), problem.domain))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=True)
    h = float(steps[0]) if len(steps) else float(dt)
    rows = {1: build_characteristic_rows(growth, problem.domain, h, 1, n1, n2, n_panels),
            2: build_characteristic_rows(growth, problem.domain, h, 2, n2, n1, n_panels)}
    plans, rates = {}, {}
    for axis, cr in rows.items():
        short = []
        for r, (row, m) in enumerate(zip(cr.mesh.rows, cr.maps)):
            lat = m.forward(row.line.points[:2])
            short.append((lat[1] - lat[0]) < (h / cr.shifts[r]) * (1.0 - 1e-9))
        plans[axis] = _RowShift(cr.mesh.row_lengths, cr.shifts, short)
        a1, a2 = cr.mesh.coords()
        rates[axis] = growth.rates(0.0, a1, a2)[axis - 1]
    first, second = order
    fwd = Resampler(rows[first].mesh, rows[second].mesh, interp_order)
    back = Resampler(rows[second].mesh, rows[first].mesh, interp_order)
    out_grid = build_uniform(problem.domain, n1, n2)
    to_out = Resampler(rows[second].mesh, out_grid, interp_order)
    v = problem.boundary.inflow_value

    def sub(flat, axis):
        G = rates[axis]
        return plans[axis](G * flat, v) / G

    a1, a2 = rows[first].mesh.coords()
    f = problem.f0(a1, a2)
    for i in range(len(steps)):
        f = fwd(sub(f, first))
        f = sub(f, second)
        if i < len(steps) - 1:
            f = back(f)
    if len(steps) == 0:
        f = fwd(f)
    field = Field2D(out_grid, to_out(f))
    return RunResult(field, len(steps), float(dt), MeshBuildReport.of(rows[first].mesh))


def _split_exact_enhanced(problem: ProblemSpec, n1, n2, dt, order=(1, 2), interp_order: int = 3):
    """Lie splitting on one uniform grid; each sub-step samples ``f_hat = G_i f`` at the
    closed-form characteristic foot (feet left of 0 take the inflow value)."""
    if tuple(order) not in ((1, 2), (2, 1)):
        raise SetupError(f"axis order must be (1, 2) or (2, 1), got {order}")
    growth = problem.growth
    L1, L2 = problem.domain
    grid = build_uniform(problem.domain, n1, n2)
    if dt is None:
        dt = _dividing_dt(problem.t_end, stable_dt_split(growth, L1 / (n1 - 1), L2 / (n2 - 1), problem.domain))
    steps = _step_sizes(problem.t_end, dt, exact_multiple=False)
    A1, A2 = grid.mesh()
    G = dict(zip((1, 2), growth.rates(0.0, A1, A2)))
    v = problem.boundary.inflow_value
    cache = {}

    def mover(axis, h):
        key = (axis, float(h))
        if key not in cache:
            foot = _evaluate(growth.foot(axis), np.full_like(A1, h), A1, A2)
            nodes = grid.axis1.points if axis == 1 else grid.axis2.points
            cache[key] = AxisResampler(nodes, foot, axis, interp_order, below=v)
        return cache[key]

    f = problem.f0(A1, A2)
    for h in steps:
        for axis in order:
            f = mover(axis, h)(G[axis] * f) / G[axis]
    return RunResult(Field2D(grid, f), len(steps), float(dt), MeshBuildReport.of(grid))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def advance(problem: ProblemSpec, scheme: Union[SchemeId, str], resolution: Resolution = 101,
            dt: Optional[float] = None, **options) -> RunResult:
    """Integrate ``problem`` to ``t_end`` with ``scheme``.

    ``resolution`` is ``n`` or ``(n1, n2)``: the number of nodes per axis on
    uniform grids, and the target node count for lattice/jagged meshes.

    Options understood by some schemes: ``order`` (axis order, ``(1, 2)`` or
    ``(2, 1)``), ``interp_order`` (1 or 3), ``n_panels`` (quadrature panels),
    ``gamma`` (nonuniform grids), ``source_order`` (``"advection-first"`` or
    ``"source-first"``).
    """
    scheme = SchemeId.parse(scheme)
    check_compatible(problem, scheme)
    n1, n2 = _resolution(resolution)
    order = tuple(options.pop("order", (1, 2)))
    unknown = set(options) - OPTIONS[scheme]
    if unknown:
        raise SetupError(f"options not understood by {scheme.value}: {sorted(unknown)}")
    if problem.t_end == 0:
        grid = build_uniform(problem.domain, n1, n2)
        return RunResult(Field2D.sample(grid, problem.f0), 0, float(dt or 0.0), MeshBuildReport.of(grid))

    def take(*names):
        got = {k: options.pop(k) for k in names if k in options}
        return got

    S = SchemeId
    if scheme is S.ConUniformUpwind:
        res = _unsplit_uniform(problem, n1, n2, dt, conservative=True)
    elif scheme is S.TransUniformUpwind:
        res = _unsplit_uniform(problem, n1, n2, dt, conservative=False)
    elif scheme in (S.ConNonuniformUpwind, S.TransNonuniformUpwind):
        res = _nonuniform_upwind(problem, n1, n2, dt, scheme is S.ConNonuniformUpwind, **take("gamma"))
    elif scheme is S.SplitConUniformUpwind:
        res = _split_uniform(problem, n1, n2, dt, True, order)
    elif scheme is S.SplitTransUniformUpwind:
        res = _split_uniform(problem, n1, n2, dt, False, order)
    elif scheme is S.SplitTransNonuniformUpwind:
        res = _split_trans_nonuniform(problem, n1, n2, dt, order, **take("interp_order"))
    elif scheme is S.ExactAnalytical:
        res = _exact_shift(problem, n1, n2, dt, "analytical", order=order, **take("n_panels"))
    elif scheme is S.ExactNumerical:
        res = _exact_shift(problem, n1, n2, dt, "quadrature", order=order, **take("n_panels"))
    elif scheme is S.ExactInterpolation:
        prov = "analytical" if _has_closed_forms(problem.growth) else "quadrature"
        res = _exact_shift(problem, n1, n2, dt, prov, interpolate=True, order=order, **take("n_panels"))
    elif scheme is S.SplitExact:
        res = _split_exact(problem, n1, n2, dt, order, **take("interp_order", "n_panels"))
    elif scheme is S.SplitExactEnhanced:
        res = _split_exact_enhanced(problem, n1, n2, dt, order, **take("interp_order"))
    elif scheme is S.SplitNonhomogeneous:
        res = _split_nonhomogeneous(problem, n1, n2, dt, order=order,
                                    **take("provenance", "n_panels", "source_order"))
    elif scheme is S.MuExact:
        res = _mu_exact(problem, n1, n2, dt, order=order, **take("n_panels"))
    else:  # pragma: no cover
        raise SetupError(f"no driver for {scheme}")
    return res
