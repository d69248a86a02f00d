"""Closed-form oracles and the built-in case studies.

All five cases live on ``[0, 2]^2`` with ``t_end = 1`` and a Gaussian bump
centred at ``(0.4, 0.4)``.

case1      constant growth (1, 1)
case2      per-axis affine growth, G1 = 0.1 + 0.05 a1, G2 = 0.5 + 0.25 a2
case3      coupled affine growth, G1 = 0.25 + 0.5 (a1 + a2), G2 = 0.5 + 0.25 (a1 + a2)
case4      constant growth (1, 1) with source h = 1 + a1 a2 (no closed form)
case5      constant growth (1, 1) with linear sink lambda = a1 + a2
appendix3  case3 solved on one fixed grid through the closed-form feet
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import (ClosedForm, Constant, Coupled, Field2D, GeneralSource, Grid2D, LinearSink,
                   PerAxis, ProblemSpec)
from .errors import PBMError, SetupError

AMPLITUDE = 50.0
CENTRE = 0.4
WIDTH = 0.005


def gaussian(a1, a2, amplitude: float = AMPLITUDE, centre=(CENTRE, CENTRE), width: float = WIDTH):
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    return amplitude * np.exp(-((a1 - centre[0]) ** 2 + (a2 - centre[1]) ** 2) / width)


def f0(a1, a2):
    return gaussian(a1, a2)


def f0_case4(a1, a2):
    return gaussian(a1, a2, amplitude=10.0)


# -- case 1 -----------------------------------------------------------------

def exact_case1(t, a1, a2):
    return f0(np.asarray(a1) - t, np.asarray(a2) - t)


# -- case 2 -----------------------------------------------------------------

def G1_case2(a1):
    return 0.1 + 0.05 * np.asarray(a1, dtype=float)


def G2_case2(a2):
    return 0.5 + 0.25 * np.asarray(a2, dtype=float)


MAP1_CASE2 = ClosedForm(lambda a: 20.0 * np.log1p(0.5 * np.asarray(a)),
                        lambda s: 2.0 * np.expm1(np.asarray(s) / 20.0))
MAP2_CASE2 = ClosedForm(lambda a: 4.0 * np.log1p(0.5 * np.asarray(a)),
                        lambda s: 2.0 * np.expm1(np.asarray(s) / 4.0))


def exact_case2(t, a1, a2):
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    b1 = (a1 + 2.0) * np.exp(-0.05 * t) - 2.0
    b2 = (a2 + 2.0) * np.exp(-0.25 * t) - 2.0
    fhat0 = G1_case2(b1) * G2_case2(b2) * f0(b1, b2)
    return fhat0 / (G1_case2(a1) * G2_case2(a2))


# -- case 3 -----------------------------------------------------------------

def G1_case3(a1, a2):
    return 0.25 + 0.5 * (np.asarray(a1, dtype=float) + np.asarray(a2, dtype=float))


def G2_case3(a1, a2):
    return 0.5 + 0.25 * (np.asarray(a1, dtype=float) + np.asarray(a2, dtype=float))


def characteristic_foot_case3(t, a1, a2):
    """Upstream a1 after going back ``t`` along da1/dt = G1(a1, a2), a2 frozen."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    t = np.asarray(t, dtype=float)
    # at t = 0 the rounding in (0.5 + a1 + a2) - 0.5 - a2 would leave a1 off by an ulp
    return np.where(t == 0, a1, np.exp(-0.5 * t) * (0.5 + a1 + a2) - 0.5 - a2)


def characteristic_foot2_case3(t, a1, a2):
    """Upstream a2 after going back ``t`` along da2/dt = G2(a1, a2), a1 frozen."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.where(t == 0, a2, np.exp(-0.25 * t) * (2.0 + a1 + a2) - 2.0 - a1)


def exact_case3(t, a1, a2):
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    e = np.exp(0.75 * t)
    c1 = 3.0 * a1 + 0.75 * t + 2.0 - 2.0 * e
    c2 = 3.0 * a2 - 0.75 * t + 1.0 - e
    A = 1.0 + 2.0 * e
    B = -2.0 + 2.0 * e
    C = -1.0 + e
    D = 2.0 + e
    det = B * C - A * D
    if np.any(np.abs(det) < 1e-12):
        raise PBMError("case 3 solution is singular (|BC - AD| < 1e-12)")
    return f0((B * c2 - D * c1) / det, (C * c1 - A * c2) / det) * np.exp(-0.75 * t)


def trace_back_rk4(G1: Callable, G2: Callable, t: float, a1, a2, steps: int = 10000):
    """Follow ``da/ds = -G(a)`` from ``(a1, a2)`` for a duration ``t`` with classical RK4."""
    y1 = np.array(a1, dtype=float)
    y2 = np.array(a2, dtype=float)
    h = t / steps
    for _ in range(steps):
        k1 = (-G1(y1, y2), -G2(y1, y2))
        k2 = (-G1(y1 + 0.5 * h * k1[0], y2 + 0.5 * h * k1[1]), -G2(y1 + 0.5 * h * k1[0], y2 + 0.5 * h * k1[1]))
        k3 = (-G1(y1 + 0.5 * h * k2[0], y2 + 0.5 * h * k2[1]), -G2(y1 + 0.5 * h * k2[0], y2 + 0.5 * h * k2[1]))
        k4 = (-G1(y1 + h * k3[0], y2 + h * k3[1]), -G2(y1 + h * k3[0], y2 + h * k3[1]))
        y1 = y1 + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y2 = y2 + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y1, y2


def traced_case3(t, a1, a2, steps: int = 2000):
    """Case 3 solution by characteristic tracing; the divergence of G is the constant 0.75."""
    b1, b2 = trace_back_rk4(G1_case3, G2_case3, t, a1, a2, steps)
    return f0(b1, b2) * np.exp(-0.75 * t)


# -- case 4 -----------------------------------------------------------------

def source_case4(t, a1, a2):
    return 1.0 + np.asarray(a1, dtype=float) * np.asarray(a2, dtype=float)


# -- case 5 -----------------------------------------------------------------

def lambda_case5(t, a1, a2):
    return np.asarray(a1, dtype=float) + np.asarray(a2, dtype=float)


def mu_case5(t, a1, a2):
    return np.exp(np.asarray(a1, dtype=float) * np.asarray(a2, dtype=float))


def exact_case5(t, a1, a2):
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    val = f0(a1 - t, a2 - t) * np.exp(-(a1 + a2) * t + t * t)
    return np.where((a1 < t) | (a2 < t), 0.0, val)


# ---------------------------------------------------------------------------
# case registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseDefinition:
    id: str
    problem: ProblemSpec
    analytic: Optional[Callable] = None
    description: str = ""

    def with_t_end(self, t_end: float) -> "CaseDefinition":
        return replace(self, problem=replace(self.problem, t_end=float(t_end)))


def _case3_growth():
    return Coupled(G1_case3, G2_case3, foot1=characteristic_foot_case3, foot2=characteristic_foot2_case3)


def get_case(case_id: str, t_end: float = 1.0, closed_mu: bool = True) -> CaseDefinition:
    """Built-in case by id (see module docstring)."""
    dom = (2.0, 2.0)
    if case_id == "case1":
        return CaseDefinition("case1", ProblemSpec(Constant(1.0, 1.0), f0, dom, t_end), exact_case1,
                              "constant growth (1, 1)")
    if case_id == "case2":
        g = PerAxis(G1_case2, G2_case2, MAP1_CASE2, MAP2_CASE2)
        return CaseDefinition("case2", ProblemSpec(g, f0, dom, t_end), exact_case2,
                              "per-axis affine growth")
    if case_id in ("case3", "appendix3"):
        desc = "coupled affine growth" if case_id == "case3" else "coupled growth, closed-form feet"
        return CaseDefinition(case_id, ProblemSpec(_case3_growth(), f0, dom, t_end), exact_case3, desc)
    if case_id == "case4":
        p = ProblemSpec(Constant(1.0, 1.0), f0_case4, dom, t_end, GeneralSource(source_case4))
        return CaseDefinition("case4", p, None, "constant growth with source 1 + a1 a2")
    if case_id == "case5":
        sink = LinearSink("a1,a2", lambda_case5, mu=mu_case5 if closed_mu else None)
        p = ProblemSpec(Constant(1.0, 1.0), f0, dom, t_end, sink)
        return CaseDefinition("case5", p, exact_case5, "constant growth with sink a1 + a2")
    raise SetupError(f"unknown case {case_id!r}; expected one of {CASE_IDS}")


CASE_IDS = ("case1", "case2", "case3", "case4", "case5", "appendix3")


# ---------------------------------------------------------------------------
# case 4 fine-mesh reference with an on-disk cache
# ---------------------------------------------------------------------------

CACHE_FORMAT = 1


def default_cache_dir() -> Path:
    env = os.environ.get("PBMSPLIT_CACHE")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "pbmsplit"


def _cache_key(case_id, n, dt, t_end):
    tag = json.dumps([case_id, n, repr(float(dt)), repr(float(t_end)), CACHE_FORMAT])
    return hashlib.sha1(tag.encode()).hexdigest()[:16]


def _load_reference(path: Path, header: dict) -> Optional[Field2D]:
    try:
        with np.load(path, allow_pickle=False) as data:
            stored = json.loads(str(data["header"]))
            if stored != header:
                return None
            grid = Grid2D.from_points(data["a1"], data["a2"])
            vals = np.array(data["values"])
        return Field2D(grid, vals)
    except Exception:
        # unreadable, truncated or inconsistent: caller recomputes
        return None


def reference_case4(resolution_fine: int = 801, dt_fine: Optional[float] = None, t_end: float = 1.0,
                    cache_dir=None, use_cache: bool = True) -> Field2D:
    """Case 4 solved on a fine uniform grid with the nonhomogeneous splitting scheme.

    Results are cached as ``.npz`` files holding ``a1``, ``a2``, ``values``
    and a JSON ``header`` (case id, grid dims, dt, t_end, format version).
    Writes go to a temporary file that is renamed into place.
    """
    from .schemes import SchemeId, advance  # imported here so analytic stays importable on its own

    n = int(resolution_fine)
    case = get_case("case4", t_end)
    if t_end == 0:
        grid = Grid2D.from_points(np.linspace(0, 2, n), np.linspace(0, 2, n))
        return Field2D.sample(grid, f0_case4)
    if dt_fine is None:
        dt_fine = 2.0 / (n - 1)
    header = {"case": "case4", "n1": n, "n2": n, "dt": repr(float(dt_fine)),
              "t_end": repr(float(t_end)), "format": CACHE_FORMAT}
    path = None
    if use_cache:
        root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
        path = root / f"case4_{n}x{n}_{_cache_key('case4', n, dt_fine, t_end)}.npz"
        if path.exists():
            hit = _load_reference(path, header)
            if hit is not None:
                return hit
    res = advance(case.problem, SchemeId.SplitNonhomogeneous, (n, n), dt_fine)
    field = res.final_field
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz.tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(fh, header=np.array(json.dumps(header)), a1=field.grid.axis1.points,
                         a2=field.grid.axis2.points, values=field.values)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return field
