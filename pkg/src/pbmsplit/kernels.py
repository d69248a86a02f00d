"""Time-step kernels: CFL=1 shifts, first-order upwind sweeps, the unsplit 2D
upwind step and a forward-Euler source step.

Inflow faces (a_i = 0) see a ghost value (zero in every case study); the
outflow faces are zero-gradient, which for a pure upwind stencil means the
last node is simply updated from its upstream neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import BoundarySpec, Field2D, check_stability, _evaluate
from .errors import EvaluationError, SetupError, StabilityError

_CFL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SweepPlan:
    """Precomputed per-node Courant numbers for a sweep along ``axis``."""

    axis: int
    cfl_per_cell: np.ndarray
    boundary: BoundarySpec = BoundarySpec()

    def __post_init__(self):
        if self.axis not in (1, 2):
            raise SetupError(f"axis must be 1 or 2, got {self.axis}")
        c = np.asarray(self.cfl_per_cell, dtype=float)
        if not np.all(np.isfinite(c)) or np.any(c < -_CFL_TOL) or np.any(c > 1.0 + _CFL_TOL):
            raise StabilityError(
                f"Courant numbers must lie in [0, 1]; got range [{c.min():g}, {c.max():g}]")
        object.__setattr__(self, "cfl_per_cell", np.clip(c, 0.0, 1.0))


def shift_exact_1d(line, inflow_value: float = 0.0) -> np.ndarray:
    """One CFL=1 upwind step: ``out[j] = in[j-1]``, ``out[0] = inflow_value``."""
    line = np.asarray(line, dtype=float)
    out = np.empty_like(line)
    out[1:] = line[:-1]
    out[0] = inflow_value
    return out


def shift_axis(values: np.ndarray, axis: int, count: int = 1, inflow_value: float = 0.0,
               out: np.ndarray = None) -> np.ndarray:
    """Shift a 2D ``(n2, n1)`` array ``count`` nodes downstream along ``axis``.

    Equivalent to ``count`` applications of ``shift_exact_1d`` per line.
    ``out`` may be ``values`` itself (the copy runs back to front).
    """
    if count < 0:
        raise SetupError("shift count must be non-negative")
    if out is None:
        out = np.empty_like(values)
    ax = 1 if axis == 1 else 0
    n = values.shape[ax]
    c = min(int(count), n)
    src = np.moveaxis(values, ax, 0)
    dst = np.moveaxis(out, ax, 0)
    if c < n:
        dst[c:] = src[:n - c].copy() if out is values else src[:n - c]
    dst[:c] = inflow_value
    return out


def upwind_sweep_1d(line, plan: Union[SweepPlan, np.ndarray, float], inflow_value: float = 0.0) -> np.ndarray:
    """``out[j] = in[j] - alpha_j (in[j] - in[j-1])`` with ghost ``in[-1] = inflow_value``.

    With every ``alpha_j == 1`` the arithmetic reduces to a copy, so the
    result matches ``shift_exact_1d`` bit for bit.
    """
    line = np.asarray(line, dtype=float)
    alpha = plan.cfl_per_cell if isinstance(plan, SweepPlan) else _check_cfl(plan)
    alpha = np.broadcast_to(alpha, line.shape)
    up = np.empty_like(line)
    up[1:] = line[:-1]
    up[0] = inflow_value
    return _blend(line, up, alpha)


def _check_cfl(alpha):
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a < -_CFL_TOL) or np.any(a > 1.0 + _CFL_TOL):
        raise StabilityError(f"Courant number outside [0, 1]: range [{a.min():g}, {a.max():g}]")
    return np.clip(a, 0.0, 1.0)


def _blend(cur, up, alpha):
    # cur - (cur - up) is not always bit-identical to up; CFL=1 nodes copy
    out = cur - alpha * (cur - up)
    ones = alpha == 1.0
    if np.any(ones):
        out = np.where(ones, up, out)
    return out


def upwind_sweep_axis(values: np.ndarray, axis: int, alpha, inflow_value: float = 0.0) -> np.ndarray:
    """Advective upwind sweep of a 2D array along ``axis`` (``alpha`` broadcastable)."""
    alpha = _check_cfl(alpha)
    up = shift_axis(values, axis, 1, inflow_value)
    return _blend(values, up, np.broadcast_to(alpha, values.shape))


def flux_sweep_axis(values: np.ndarray, axis: int, G: np.ndarray, dt: float, da: np.ndarray,
                    inflow_value: float = 0.0) -> np.ndarray:
    """Conservative upwind sweep ``f_j -= dt/da_j (G_j f_j - G_{j-1} f_{j-1})``.

    ``G`` holds nodal growth rates (same shape as ``values``); ``da`` the
    backward spacings per node along ``axis`` (``da[0]`` is the spacing to
    the ghost node, taken equal to the first interior spacing).
    """
    flux = G * values
    up = shift_axis(flux, axis, 1, inflow_value)
    shape = [1, 1]
    shape[1 if axis == 1 else 0] = -1
    ratio = dt / np.reshape(da, shape)
    c = G * ratio
    if np.any(c > 1.0 + _CFL_TOL):
        raise StabilityError(f"Courant number {c.max():g} exceeds 1 in conservative sweep")
    return values - ratio * (flux - up)


def upwind_step_2d_unsplit(field: Field2D, alpha, beta, boundary: BoundarySpec = BoundarySpec()) -> Field2D:
    """One unsplit step ``f -= alpha (f - f_west) + beta (f - f_south)``.

    ``alpha``/``beta`` may be scalars or per-node arrays.
    """
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if not (np.all(a >= 0) and np.all(b >= 0) and np.all(a + b <= 1.0 + _CFL_TOL)):
        if a.ndim == 0 and b.ndim == 0 and not check_stability(float(a), float(b)):
            raise StabilityError(f"unstable step: alpha={float(a):g}, beta={float(b):g}, alpha+beta > 1 "
                                 "or negative")
        raise StabilityError("unstable step: alpha + beta > 1 (or negative) at some node")
    f = field.values
    v = boundary.inflow_value
    west = shift_axis(f, 1, 1, v)
    south = shift_axis(f, 2, 1, v)
    return Field2D(field.grid, f - a * (f - west) - b * (f - south))


def upwind_step_2d_unchecked(values, alpha, beta, inflow_value: float = 0.0) -> np.ndarray:
    """Same update on a raw array without the CFL guard (instability demonstrations)."""
    west = shift_axis(values, 1, 1, inflow_value)
    south = shift_axis(values, 2, 1, inflow_value)
    return values - alpha * (values - west) - beta * (values - south)


def euler_source_step(field: Field2D, h: Callable, t: float, dt: float) -> Field2D:
    """``f + dt * h(t, a1, a2)`` at the grid nodes."""
    if not dt > 0:
        raise SetupError(f"dt must be positive, got {dt}")
    A1, A2 = field.grid.mesh()
    src = _evaluate(h, np.full_like(A1, t), A1, A2)
    if not np.all(np.isfinite(src)):
        k, j = np.argwhere(~np.isfinite(src))[0]
        raise EvaluationError(f"source returned non-finite value at a1={A1[k, j]:g}, a2={A2[k, j]:g}, t={t:g}")
    return Field2D(field.grid, field.values + dt * src)
