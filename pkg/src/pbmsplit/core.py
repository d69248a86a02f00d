"""Domain types shared by every module: axes, grids, fields, growth rates,
source terms and problem definitions, plus the CFL/time-step helpers.

Array layout: a field over a ``Grid2D`` with ``n1`` nodes along a1 and ``n2``
nodes along a2 has shape ``(n2, n1)``; ``values[k, j]`` sits at
``(axis1[j], axis2[k])``.  Axis-1 sweeps therefore run over contiguous memory.

All growth/source callbacks are expected to be vectorised: they receive numpy
arrays and return arrays (or scalars, which get broadcast).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, EvaluationError, SetupError

Domain = Tuple[float, float]

# nodes per axis used when sampling growth rates for positivity checks
_CHECK_NODES = 101
_CHECK_TIMES = 51


def _evaluate(fn, *args) -> np.ndarray:
    """Call a vectorised callback and broadcast the result to the argument shape."""
    arrays = [np.asarray(a, dtype=float) for a in args]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    out = np.asarray(fn(*arrays), dtype=float)
    return np.broadcast_to(out, shape).copy() if out.shape != shape else out


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Axis1D:
    """Strictly increasing, finite node coordinates along one intrinsic variable."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise SetupError(f"an axis needs at least 2 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise SetupError("axis points must be finite")
        if np.any(np.diff(pts) <= 0.0):
            bad = int(np.argmin(np.diff(pts)))
            raise SetupError(f"axis points not strictly increasing at index {bad}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, length: float, n: int) -> "Axis1D":
        return cls(np.linspace(0.0, float(length), int(n)))

    def __len__(self) -> int:
        return self.points.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.points, dtype=dtype)

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def length(self) -> float:
        return float(self.points[-1])


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor-product grid; every (j, k) pair is a node."""

    axis1: Axis1D
    axis2: Axis1D

    @classmethod
    def from_points(cls, a1: Sequence[float], a2: Sequence[float]) -> "Grid2D":
        return cls(Axis1D(np.asarray(a1)), Axis1D(np.asarray(a2)))

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.axis2), len(self.axis1))

    @property
    def size(self) -> int:
        return len(self.axis1) * len(self.axis2)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays ``(A1, A2)``, each of shape ``(n2, n1)``."""
        return np.meshgrid(self.axis1.points, self.axis2.points)

    def sample(self, fn: Callable) -> np.ndarray:
        A1, A2 = self.mesh()
        return _evaluate(fn, A1, A2)


@dataclass(frozen=True, eq=False)
class JaggedRow:
    anchor: float
    line: Axis1D


@dataclass(frozen=True, eq=False)
class JaggedMesh:
    """Array of monotone lines, each at a fixed anchor coordinate.

    ``orientation`` names the axis the lines run along: with ``orientation=1``
    every row is a line in a1 and the anchors are a2 values.
    """

    rows: Tuple[JaggedRow, ...]
    orientation: int

    def __post_init__(self):
        if self.orientation not in (1, 2):
            raise SetupError(f"orientation must be 1 or 2, got {self.orientation}")
        rows = tuple(self.rows)
        if len(rows) < 2:
            raise SetupError("a jagged mesh needs at least 2 rows")
        anchors = np.array([r.anchor for r in rows], dtype=float)
        if np.any(np.diff(anchors) <= 0.0) or not np.all(np.isfinite(anchors)):
            raise SetupError("jagged mesh anchors must be finite and strictly increasing")
        object.__setattr__(self, "rows", rows)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([r.anchor for r in self.rows])

    @property
    def row_lengths(self) -> np.ndarray:
        return np.array([len(r.line) for r in self.rows], dtype=int)

    @property
    def offsets(self) -> np.ndarray:
        """Start index of each row in the flattened node ordering (plus total)."""
        return np.concatenate([[0], np.cumsum(self.row_lengths)])

    @property
    def node_count(self) -> int:
        return int(self.row_lengths.sum())

    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened ``(a1, a2)`` coordinates, row by row."""
        along = np.concatenate([r.line.points for r in self.rows])
        cross = np.concatenate([np.full(len(r.line), r.anchor) for r in self.rows])
        return (along, cross) if self.orientation == 1 else (cross, along)

    def split(self, flat: np.ndarray) -> list:
        """Split a flat value vector into per-row arrays (views)."""
        off = self.offsets
        return [flat[off[i]:off[i + 1]] for i in range(len(self.rows))]

    def sample(self, fn: Callable) -> np.ndarray:
        a1, a2 = self.coords()
        return _evaluate(fn, a1, a2)


@dataclass(eq=False)
class Field2D:
    """Number density over a ``Grid2D``; ``values`` has shape ``grid.shape``."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise SetupError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            k, j = np.argwhere(~np.isfinite(vals))[0]
            raise EvaluationError(
                f"non-finite field value at a1={self.grid.axis1.points[j]:g}, "
                f"a2={self.grid.axis2.points[k]:g}")
        self.values = vals

    @classmethod
    def sample(cls, grid: Grid2D, fn: Callable) -> "Field2D":
        return cls(grid, grid.sample(fn))

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.values.copy())


# ---------------------------------------------------------------------------
# growth rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedForm:
    """A closed-form monotone map and (optionally) its inverse.

    For size maps ``forward(a) = int_0^a da'/G(a')``; for time maps
    ``forward(t) = int_0^t G(t') dt'``.
    """

    forward: Callable
    inverse: Optional[Callable] = None


class GrowthSpec:
    """Base class of the growth-rate variants.

    Commuting variants (everything but ``Coupled``) factor each rate as
    ``G_i(t, a_i) = T_i(t) * S_i(a_i)``; the exact schemes are built on that
    factorisation.
    """

    kind = "abstract"
    commuting = True
    time_dependent = False

    def rates(self, t, a1, a2) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    # factorisation hooks for the commuting classes
    def time_factor(self, axis: int, t) -> np.ndarray:
        raise NotImplementedError

    def size_factor(self, axis: int, a) -> np.ndarray:
        raise NotImplementedError

    def size_closed_form(self, axis: int) -> Optional[ClosedForm]:
        return None

    def time_closed_form(self, axis: int) -> Optional[ClosedForm]:
        return None

    def allows_zero(self) -> bool:
        return False

    def check_positive(self, domain: Domain, t_end: float = 0.0, n: int = _CHECK_NODES):
        """Sample the rates on an ``n x n`` node grid (and over time) and reject
        non-positive, non-finite or unbounded values."""
        A1, A2 = np.meshgrid(np.linspace(0, domain[0], n), np.linspace(0, domain[1], n))
        times = np.linspace(0.0, t_end, _CHECK_TIMES) if self.time_dependent and t_end > 0 else [0.0]
        for t in times:
            g1, g2 = self.rates(t, A1, A2)
            for i, g in ((1, g1), (2, g2)):
                if not np.all(np.isfinite(g)):
                    raise DomainError(f"growth rate G{i} is not finite on the domain (t={t:g})")
                bad = g < 0.0 if self.allows_zero() else g <= 0.0
                if np.any(bad):
                    idx = np.unravel_index(int(np.argmax(bad)), g.shape)
                    raise DomainError(
                        f"growth rate G{i}={g[idx]:g} not positive at "
                        f"a1={A1[idx]:g}, a2={A2[idx]:g}, t={t:g}")

    def max_rates(self, domain: Domain, da1: float, da2: float, t_end: float = 0.0):
        """Maxima of G1 and G2 over the uniform nodes with the given spacings."""
        n1 = int(round(domain[0] / da1)) + 1
        n2 = int(round(domain[1] / da2)) + 1
        A1, A2 = np.meshgrid(np.linspace(0, domain[0], n1), np.linspace(0, domain[1], n2))
        times = np.linspace(0.0, t_end, _CHECK_TIMES) if self.time_dependent and t_end > 0 else [0.0]
        m1 = m2 = -np.inf
        for t in times:
            g1, g2 = self.rates(t, A1, A2)
            bad = (g1 < 0) | (g2 < 0) if self.allows_zero() else (g1 <= 0) | (g2 <= 0)
            if np.any(bad) or not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
                raise DomainError("growth rate not positive/finite on the grid nodes")
            m1 = max(m1, float(g1.max()))
            m2 = max(m2, float(g2.max()))
        return m1, m2


@dataclass(frozen=True)
class Constant(GrowthSpec):
    g1: float
    g2: float

    kind = "constant"

    def __post_init__(self):
        if not (np.isfinite(self.g1) and np.isfinite(self.g2)) or self.g1 < 0 or self.g2 < 0:
            raise DomainError(f"constant growth rates must be finite and >= 0, got {self.g1}, {self.g2}")

    def allows_zero(self) -> bool:
        return True

    def rates(self, t, a1, a2):
        shape = np.broadcast_shapes(np.shape(a1), np.shape(a2))
        return np.full(shape, float(self.g1)), np.full(shape, float(self.g2))

    def time_factor(self, axis, t):
        return np.full(np.shape(t), float(self.g1 if axis == 1 else self.g2))

    def size_factor(self, axis, a):
        return np.ones(np.shape(a))

    def size_closed_form(self, axis):
        return ClosedForm(lambda a: np.asarray(a, dtype=float), lambda s: np.asarray(s, dtype=float))

    def time_closed_form(self, axis):
        g = float(self.g1 if axis == 1 else self.g2)
        return ClosedForm(lambda t: g * np.asarray(t, dtype=float),
                          (lambda s: np.asarray(s, dtype=float) / g) if g > 0 else None)


@dataclass(frozen=True)
class PerAxis(GrowthSpec):
    """``G1(a1)``, ``G2(a2)``; optional closed-form maps ``int_0^a 1/G``."""

    G1: Callable
    G2: Callable
    map1: Optional[ClosedForm] = None
    map2: Optional[ClosedForm] = None

    kind = "per-axis"

    def rates(self, t, a1, a2):
        shape = np.broadcast_shapes(np.shape(a1), np.shape(a2))
        return (np.broadcast_to(_evaluate(self.G1, a1), shape),
                np.broadcast_to(_evaluate(self.G2, a2), shape))

    def time_factor(self, axis, t):
        return np.ones(np.shape(t))

    def size_factor(self, axis, a):
        return _evaluate(self.G1 if axis == 1 else self.G2, a)

    def size_closed_form(self, axis):
        return self.map1 if axis == 1 else self.map2

    def time_closed_form(self, axis):
        return ClosedForm(lambda t: np.asarray(t, dtype=float), lambda s: np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Coupled(GrowthSpec):
    """``G1(a1, a2)``, ``G2(a1, a2)``.

    ``foot1(dt, a1, a2)`` (optional) returns the upstream a1 reached by going
    back ``dt`` along ``da1/dt = G1(a1, a2)`` with a2 frozen; ``foot2``
    likewise for the a2 sub-problem.
    """

    G1: Callable
    G2: Callable
    foot1: Optional[Callable] = None
    foot2: Optional[Callable] = None

    kind = "coupled"
    commuting = False

    def rates(self, t, a1, a2):
        return _evaluate(self.G1, a1, a2), _evaluate(self.G2, a1, a2)

    def foot(self, axis: int) -> Optional[Callable]:
        return self.foot1 if axis == 1 else self.foot2


@dataclass(frozen=True)
class TimeOnly(GrowthSpec):
    """``G1(t)``, ``G2(t)``; optional closed-form ``int_0^t G``."""

    G1: Callable
    G2: Callable
    map1: Optional[ClosedForm] = None
    map2: Optional[ClosedForm] = None

    kind = "time"
    time_dependent = True

    def rates(self, t, a1, a2):
        shape = np.broadcast_shapes(np.shape(a1), np.shape(a2))
        return (np.full(shape, float(_evaluate(self.G1, t))),
                np.full(shape, float(_evaluate(self.G2, t))))

    def time_factor(self, axis, t):
        return _evaluate(self.G1 if axis == 1 else self.G2, t)

    def size_factor(self, axis, a):
        return np.ones(np.shape(a))

    def size_closed_form(self, axis):
        return ClosedForm(lambda a: np.asarray(a, dtype=float), lambda s: np.asarray(s, dtype=float))

    def time_closed_form(self, axis):
        return self.map1 if axis == 1 else self.map2


@dataclass(frozen=True)
class SeparableTimeSize(GrowthSpec):
    """``G_i(t, a_i) = G_it(t) * G_ia(a_i)``."""

    G1t: Callable
    G1a: Callable
    G2t: Callable
    G2a: Callable
    size_map1: Optional[ClosedForm] = None
    size_map2: Optional[ClosedForm] = None
    time_map1: Optional[ClosedForm] = None
    time_map2: Optional[ClosedForm] = None

    kind = "separable-time-size"
    time_dependent = True

    def rates(self, t, a1, a2):
        shape = np.broadcast_shapes(np.shape(a1), np.shape(a2))
        tt1 = float(_evaluate(self.G1t, t))
        tt2 = float(_evaluate(self.G2t, t))
        return (np.broadcast_to(tt1 * _evaluate(self.G1a, a1), shape),
                np.broadcast_to(tt2 * _evaluate(self.G2a, a2), shape))

    def time_factor(self, axis, t):
        return _evaluate(self.G1t if axis == 1 else self.G2t, t)

    def size_factor(self, axis, a):
        return _evaluate(self.G1a if axis == 1 else self.G2a, a)

    def size_closed_form(self, axis):
        return self.size_map1 if axis == 1 else self.size_map2

    def time_closed_form(self, axis):
        return self.time_map1 if axis == 1 else self.time_map2


# ---------------------------------------------------------------------------
# sources, boundaries, problems
# ---------------------------------------------------------------------------

LAMBDA_FORMS = ("constant", "a1", "a2", "t", "t,a1", "t,a2", "a1,a2", "t,a1,a2")


class SourceSpec:
    kind = "abstract"


@dataclass(frozen=True)
class NoSource(SourceSpec):
    kind = "none"


@dataclass(frozen=True)
class GeneralSource(SourceSpec):
    """Right-hand side ``h(t, a1, a2)``."""

    h: Callable
    kind = "general"


@dataclass(frozen=True)
class LinearSink(SourceSpec):
    """Right-hand side ``-lam(t, a1, a2) * f``.

    ``form`` declares which arguments ``lam`` depends on (one of
    ``LAMBDA_FORMS``); ``lam`` is always called as ``lam(t, a1, a2)``.
    ``branch`` picks the integrating factor for a constant ``lam``
    (``"t"``, ``"a1"`` or ``"a2"``).  ``mu`` optionally supplies the
    integrating factor in closed form as ``mu(t, a1, a2)``.
    """

    form: str
    lam: Callable
    branch: str = "t"
    mu: Optional[Callable] = None
    kind = "linear-sink"

    def __post_init__(self):
        if self.form not in LAMBDA_FORMS:
            raise SetupError(f"unknown lambda form {self.form!r}; expected one of {LAMBDA_FORMS}")
        if self.branch not in ("t", "a1", "a2"):
            raise SetupError(f"unknown constant-lambda branch {self.branch!r}")


@dataclass(frozen=True)
class BoundarySpec:
    """Zero ghost values at the a_i = 0 faces, zero-gradient (no-flux) outflow
    at the a_i = L_i faces."""

    inflow: str = "ghost-zero"
    outflow: str = "no-flux"

    def __post_init__(self):
        if self.inflow != "ghost-zero" or self.outflow != "no-flux":
            raise SetupError(f"unsupported boundary pair ({self.inflow}, {self.outflow})")

    @property
    def inflow_value(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    growth: GrowthSpec
    initial_condition: Callable
    domain: Domain = (2.0, 2.0)
    t_end: float = 1.0
    source: SourceSpec = field(default_factory=NoSource)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)

    def __post_init__(self):
        L1, L2 = (float(x) for x in self.domain)
        if not (L1 > 0 and L2 > 0 and np.isfinite(L1) and np.isfinite(L2)):
            raise SetupError(f"domain lengths must be positive, got {self.domain}")
        if not (self.t_end >= 0 and np.isfinite(self.t_end)):
            raise SetupError(f"t_end must be >= 0, got {self.t_end}")
        object.__setattr__(self, "domain", (L1, L2))
        self.growth.check_positive(self.domain, self.t_end)
        if isinstance(self.source, LinearSink):
            A1, A2 = np.meshgrid(np.linspace(0, L1, 21), np.linspace(0, L2, 21))
            for t in np.linspace(0, self.t_end, 5):
                if not np.all(np.isfinite(_evaluate(self.source.lam, t, A1, A2))):
                    raise DomainError("sink rate lambda is not finite on the domain")

    def f0(self, a1, a2) -> np.ndarray:
        return _evaluate(self.initial_condition, a1, a2)


# ---------------------------------------------------------------------------
# CFL numbers and stable time steps
# ---------------------------------------------------------------------------

def cfl_numbers(g1: float, g2: float, dt: float, da1: float, da2: float) -> Tuple[float, float]:
    """Courant numbers ``alpha = g1 dt/da1`` and ``beta = g2 dt/da2``."""
    if not (dt > 0 and da1 > 0 and da2 > 0):
        raise SetupError(f"step sizes must be positive (dt={dt}, da1={da1}, da2={da2})")
    if g1 < 0 or g2 < 0:
        raise SetupError("growth rates must be non-negative")
    return g1 * dt / da1, g2 * dt / da2


def check_stability(alpha: float, beta: float, tol: float = 1e-12) -> bool:
    """True iff ``alpha, beta >= 0`` and ``alpha + beta <= 1`` (von Neumann bound)."""
    return bool(alpha >= 0 and beta >= 0 and alpha + beta <= 1.0 + tol)


def stable_dt_unsplit(growth: GrowthSpec, da1: float, da2: float, domain: Domain,
                      t_end: float = 0.0) -> float:
    """Largest dt with ``max G1 dt/da1 + max G2 dt/da2 <= 1``, maxima over grid nodes."""
    if not (da1 > 0 and da2 > 0):
        raise SetupError("mesh spacings must be positive")
    m1, m2 = growth.max_rates(domain, da1, da2, t_end)
    rate = m1 / da1 + m2 / da2
    if rate <= 0:
        raise DomainError("all growth rates are zero; the time step is unbounded")
    return 1.0 / rate


def stable_dt_split(growth: GrowthSpec, da1: float, da2: float, domain: Domain,
                    t_end: float = 0.0) -> float:
    """Largest dt keeping every split sub-problem at CFL <= 1."""
    if not (da1 > 0 and da2 > 0):
        raise SetupError("mesh spacings must be positive")
    m1, m2 = growth.max_rates(domain, da1, da2, t_end)
    limits = [da / m for da, m in ((da1, m1), (da2, m2)) if m > 0]
    if not limits:
        raise DomainError("all growth rates are zero; the time step is unbounded")
    return min(limits)
