"""Error metrics, case runs, convergence studies and CSV output."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .analytic import CaseDefinition, reference_case4
from .core import Field2D, Grid2D
from .errors import SetupError
from .interp import Resampler
from .schemes import Resolution, RunResult, SchemeId, advance, _resolution

# errors at or below this are treated as round-off; no order is reported
MACHINE_FLOOR = 1e-12


def _pair(y, y_ref):
    y = np.asarray(y, dtype=float).ravel()
    r = np.asarray(y_ref, dtype=float).ravel()
    if y.size != r.size:
        raise SetupError(f"length mismatch: {y.size} vs {r.size}")
    if y.size == 0:
        raise SetupError("need at least one value")
    return y, r


def rmse(y, y_ref) -> float:
    y, r = _pair(y, y_ref)
    return float(np.sqrt(np.mean((y - r) ** 2)))


def mae(y, y_ref) -> float:
    y, r = _pair(y, y_ref)
    return float(np.max(np.abs(y - r)))


@dataclass
class ErrorReport:
    scheme: SchemeId
    n1: int
    n2: int
    dt: float
    rmse: float
    mae: float
    wall_time_seconds: float
    nodes: int = 0

    def __post_init__(self):
        if not (0.0 <= self.rmse <= self.mae * (1 + 1e-12) + 1e-300):
            raise ValueError(f"inconsistent report: rmse={self.rmse}, mae={self.mae}")

    def row(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d


@dataclass
class ConvergenceTable:
    reports: List[ErrorReport]
    observed_order: List[Optional[float]] = field(default_factory=list)

    def rows(self) -> List[dict]:
        out = []
        for i, r in enumerate(self.reports):
            d = r.row()
            d["observed_order"] = "" if i == 0 or self.observed_order[i - 1] is None \
                else f"{self.observed_order[i - 1]:.6g}"
            out.append(d)
        return out


def reference_values(case: CaseDefinition, grid: Grid2D, reference: Optional[Field2D] = None) -> np.ndarray:
    """The oracle on ``grid``: the analytic solution, or the cached reference for case 4.

    Reference nodes that coincide with the grid (to round-off) are injected
    directly; otherwise the reference is interpolated bilinearly.
    """
    t = case.problem.t_end
    A1, A2 = grid.mesh()
    if case.analytic is not None:
        return case.analytic(t, A1, A2)
    if case.id != "case4" and reference is None:
        raise SetupError(f"case {case.id!r} has no analytic solution or reference field")
    if reference is None:
        reference = reference_case4(t_end=t)
    idx = []
    for ax, rax in ((grid.axis1.points, reference.grid.axis1.points),
                    (grid.axis2.points, reference.grid.axis2.points)):
        k = np.clip(np.searchsorted(rax, ax), 0, rax.size - 1)
        km = np.clip(k - 1, 0, rax.size - 1)
        k = np.where(np.abs(rax[km] - ax) < np.abs(rax[k] - ax), km, k)
        if np.max(np.abs(rax[k] - ax)) > 1e-9 * max(1.0, rax[-1]):
            return Resampler(reference.grid, grid, 1)(reference.values)
        idx.append(k)
    return reference.values[np.ix_(idx[1], idx[0])]


def write_field_csv(fld: Field2D, path) -> None:
    """``a1,a2,value`` per node (a1 fastest), 17 significant digits."""
    A1, A2 = fld.grid.mesh()
    with open(path, "w", newline="") as fh:
        fh.write("a1,a2,value\n")
        for a, b, v in zip(A1.ravel(), A2.ravel(), fld.values.ravel()):
            fh.write(f"{a:.17g},{b:.17g},{v:.17g}\n")


def write_reports_csv(rows: Sequence[dict], path) -> None:
    rows = list(rows)
    if not rows:
        raise SetupError("nothing to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})


def run_case(case: CaseDefinition, scheme: Union[SchemeId, str], resolution: Resolution = 101,
             dt: Optional[float] = None, dump_field=None, reference: Optional[Field2D] = None,
             **options) -> ErrorReport:
    """Advance ``case`` with ``scheme`` and compare against its oracle on the output grid."""
    scheme = SchemeId.parse(scheme)
    n1, n2 = _resolution(resolution)
    t0 = time.perf_counter()
    res: RunResult = advance(case.problem, scheme, (n1, n2), dt, **options)
    wall = time.perf_counter() - t0
    fld = res.final_field
    ref = reference_values(case, fld.grid, reference)
    if dump_field is not None:
        write_field_csv(fld, dump_field)
    return ErrorReport(scheme, n1, n2, float(res.dt_used), rmse(fld.values, ref), mae(fld.values, ref),
                       wall, fld.grid.size)


def observed_orders(reports: Sequence[ErrorReport], by: str = "resolution") -> List[Optional[float]]:
    """``log(e_coarse/e_fine) / log(refinement ratio)`` per adjacent pair.

    ``by="resolution"`` uses the ratio of node spacings, ``by="dt"`` the
    ratio of time steps.  Pairs where both errors sit at round-off level
    give ``None`` (order undefined).
    """
    out = []
    for c, f in zip(reports[:-1], reports[1:]):
        if c.rmse <= MACHINE_FLOOR and f.rmse <= MACHINE_FLOOR:
            out.append(None)
            continue
        if by == "dt":
            ratio = c.dt / f.dt
        else:
            ratio = (f.n1 - 1) / (c.n1 - 1)
        if ratio <= 1 or f.rmse <= 0:
            out.append(None)
            continue
        out.append(math.log(c.rmse / f.rmse) / math.log(ratio))
    return out


def convergence_study(case: CaseDefinition, scheme: Union[SchemeId, str], ladder: Sequence[Resolution],
                      dts: Optional[Sequence[Optional[float]]] = None, workers: int = 1,
                      reference: Optional[Field2D] = None, **options) -> ConvergenceTable:
    """Run ``run_case`` per rung.

    ``ladder`` lists resolutions (strictly increasing).  To refine in time
    instead, repeat one resolution and pass strictly decreasing ``dts``.
    Rungs may run on ``workers`` threads; results keep ladder order.
    """
    ladder = [_resolution(r) for r in ladder]
    if len(ladder) < 3:
        raise SetupError(f"a convergence ladder needs at least 3 rungs, got {len(ladder)}")
    if dts is None:
        dts = [None] * len(ladder)
    if len(dts) != len(ladder):
        raise SetupError("dts must match the ladder length")
    by_dt = all(a == ladder[0] for a in ladder)
    if by_dt:
        if any(d is None for d in dts) or any(b >= a for a, b in zip(dts[:-1], dts[1:])):
            raise SetupError("a fixed-resolution ladder needs strictly decreasing dts")
    elif any(b[0] <= a[0] or b[1] <= a[1] for a, b in zip(ladder[:-1], ladder[1:])):
        raise SetupError("refinement ladder must be strictly increasing in resolution")
    scheme = SchemeId.parse(scheme)
    if case.analytic is None and reference is None and case.id == "case4":
        reference = reference_case4(t_end=case.problem.t_end)

    def rung(i):
        return run_case(case, scheme, ladder[i], dts[i], reference=reference, **dict(options))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(rung, range(len(ladder))))
    else:
        reports = [rung(i) for i in range(len(ladder))]
    return ConvergenceTable(reports, observed_orders(reports, "dt" if by_dt else "resolution"))
