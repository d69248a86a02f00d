"""Mesh construction: uniform grids, backward-marched CFL=1 grids and jagged
per-row meshes, plus a plain-text node file format.

Backward marches start at the right end ``L`` and step left by
``coefficient * G(a) * dt``.  The march stops once the next node would fall
at or below zero.  With ``termination="prepend-zero"`` (the default) ``0`` is
then added as the first node, so the first cell may be short; with
``"last-positive"`` the mesh simply begins at the last node reached, which
leaves a gap ``[0, a^0)`` uncovered but reproduces published node counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .core import Axis1D, Coupled, Domain, Grid2D, GrowthSpec, JaggedMesh, JaggedRow, _evaluate
from .errors import DomainError, SetupError
from .transform import DEFAULT_PANELS, MonotoneMap

UNDERFLOW = 1e-14
# a march landing this close to 0 (relative to L) is treated as landing on 0
_SNAP = 1e-9
_MAX_NODES = 5_000_000


@dataclass(frozen=True, eq=False)
class MeshBuildReport:
    mesh: Union[Grid2D, JaggedMesh]
    node_count: int
    min_spacing: float
    max_spacing: float

    @classmethod
    def of(cls, mesh) -> "MeshBuildReport":
        if isinstance(mesh, Grid2D):
            d = np.concatenate([mesh.axis1.spacing, mesh.axis2.spacing])
            n = mesh.size
        else:
            d = np.concatenate([r.line.spacing for r in mesh.rows] + [np.diff(mesh.anchors)])
            n = mesh.node_count
        return cls(mesh, int(n), float(d.min()), float(d.max()))


def build_uniform(domain: Domain, n1: int, n2: int) -> Grid2D:
    if int(n1) < 2 or int(n2) < 2:
        raise SetupError(f"uniform grid needs n1, n2 >= 2, got {n1}, {n2}")
    return Grid2D(Axis1D.uniform(domain[0], n1), Axis1D.uniform(domain[1], n2))


TERMINATIONS = ("prepend-zero", "last-positive")


def _check_termination(termination):
    if termination not in TERMINATIONS:
        raise SetupError(f"termination must be one of {TERMINATIONS}, got {termination!r}")


def backward_march(step: Callable[[float], float], L: float,
                   termination: str = "prepend-zero") -> np.ndarray:
    """Nodes ``L = x_m > x_{m-1} > ... > 0`` with ``x_{j-1} = x_j - step(x_j)``."""
    _check_termination(termination)
    nodes = [float(L)]
    a = float(L)
    while True:
        s = float(step(a))
        if not np.isfinite(s) or s < UNDERFLOW * L:
            raise DomainError(f"backward mesh step {s:g} at a={a:g} underflows (below {UNDERFLOW:g}*L)")
        nxt = a - s
        if nxt <= _SNAP * L:
            break
        nodes.append(nxt)
        a = nxt
        if len(nodes) > _MAX_NODES:
            raise DomainError("backward march exceeded the node limit")
    if termination == "prepend-zero":
        nodes.append(0.0)
    elif len(nodes) < 2:
        raise DomainError("backward march produced a single node; dt is too large for the domain")
    return np.array(nodes[::-1])


def build_nonuniform_cfl1(growth: GrowthSpec, domain: Domain, dt: float, gamma: float = 0.5,
                          termination: str = "prepend-zero") -> Grid2D:
    """Axis 1 marched with ``gamma*G1*dt``, axis 2 with ``(1-gamma)*G2*dt``.

    Growth must factor per axis (size factors are used; time factors must
    be folded into ``dt`` by the caller).
    """
    if not dt > 0:
        raise SetupError(f"dt must be positive, got {dt}")
    if not 0.0 <= gamma <= 1.0:
        raise SetupError(f"gamma must lie in [0, 1], got {gamma}")
    if isinstance(growth, Coupled):
        raise SetupError("build_nonuniform_cfl1 needs growth that factors per axis; use build_jagged")
    L1, L2 = domain
    ax1 = backward_march(lambda a: gamma * float(growth.size_factor(1, a)) * dt, L1, termination)
    ax2 = backward_march(lambda a: (1.0 - gamma) * float(growth.size_factor(2, a)) * dt, L2, termination)
    return Grid2D(Axis1D(ax1), Axis1D(ax2))


def build_jagged(growth: Coupled, domain: Domain, dt: float, for_axis: int = 1,
                 termination: str = "prepend-zero") -> JaggedMesh:
    """Jagged mesh whose lines run along ``for_axis``.

    Anchors are marched from the far end using the cross-axis rate on the
    far face (``G2(L1, .)`` for ``for_axis=1``); each line is then marched
    with its own anchor frozen.
    """
    if not dt > 0:
        raise SetupError(f"dt must be positive, got {dt}")
    if for_axis not in (1, 2):
        raise SetupError(f"for_axis must be 1 or 2, got {for_axis}")
    L1, L2 = domain
    G1 = lambda a1, a2: float(growth.rates(0.0, np.asarray(a1), np.asarray(a2))[0])
    G2 = lambda a1, a2: float(growth.rates(0.0, np.asarray(a1), np.asarray(a2))[1])
    if for_axis == 1:
        anchors = backward_march(lambda a2: dt * G2(L1, a2), L2, termination)
        rows = [JaggedRow(float(b), Axis1D(backward_march(lambda a1: dt * G1(a1, b), L1, termination)))
                for b in anchors]
    else:
        anchors = backward_march(lambda a1: dt * G1(a1, L2), L1, termination)
        rows = [JaggedRow(float(b), Axis1D(backward_march(lambda a2: dt * G2(b, a2), L2, termination)))
                for b in anchors]
    return JaggedMesh(tuple(rows), for_axis)


# ---------------------------------------------------------------------------
# transformed lattices (exact shift schemes)
# ---------------------------------------------------------------------------

def lattice_backward(total: float, h: float) -> np.ndarray:
    """Points ``total - k h`` (k = 0, 1, ...) that stay >= 0, ascending, with 0 included."""
    if not (h > 0 and total > 0):
        raise SetupError("lattice spacing and extent must be positive")
    m = int(math.floor(total / h + 1e-9))
    pts = (total - h * np.arange(m + 1))[::-1].copy()
    if abs(pts[0]) <= 1e-9 * h:
        pts[0] = 0.0
    else:
        pts = np.concatenate([[0.0], pts])
    return pts


def lattice_steps(total: float, n: int, duration: float) -> int:
    """Smallest shift count per ``duration`` giving at least ``n`` lattice nodes over ``total``."""
    return max(1, int(math.ceil(duration * (n - 1) / total - 1e-9)))


@dataclass(frozen=True, eq=False)
class CharacteristicRows:
    """Jagged mesh whose lines are uniform lattices in each row's own transformed
    coordinate, so a sub-step of ``dt`` is exactly ``shifts[r]`` node moves on row ``r``."""

    mesh: JaggedMesh
    shifts: np.ndarray
    maps: Tuple[MonotoneMap, ...]


def build_characteristic_rows(growth: Coupled, domain: Domain, dt: float, for_axis: int,
                              n_along: int, n_rows: int, n_panels: int = DEFAULT_PANELS
                              ) -> CharacteristicRows:
    """Jagged rows for coupled growth with resolution decoupled from ``dt``.

    Anchors are the uniform cross-axis nodes (``n_rows`` of them).  Row ``r``
    uses ``a_tilde_r(a) = int_0^a da'/G_i(a', anchor_r)`` and lattice spacing
    ``dt / K_r`` with ``K_r`` the smallest integer giving ``n_along`` nodes.
    """
    if not dt > 0:
        raise SetupError(f"dt must be positive, got {dt}")
    L_along = domain[for_axis - 1]
    L_cross = domain[2 - for_axis]
    anchors = np.linspace(0.0, L_cross, int(n_rows))
    rows, shifts, maps = [], [], []
    for b in anchors:
        if for_axis == 1:
            w = lambda a, b=b: 1.0 / growth.rates(0.0, a, np.full_like(a, b))[0]
        else:
            w = lambda a, b=b: 1.0 / growth.rates(0.0, np.full_like(a, b), a)[1]
        m = MonotoneMap(w, L_along, None, n_panels)
        total = m.total
        K = lattice_steps(total, n_along, dt)
        pts = m.inverse(lattice_backward(total, dt / K))
        pts[0] = 0.0
        pts[-1] = L_along
        rows.append(JaggedRow(float(b), Axis1D(pts)))
        shifts.append(K)
        maps.append(m)
    return CharacteristicRows(JaggedMesh(tuple(rows), for_axis), np.array(shifts), tuple(maps))


# ---------------------------------------------------------------------------
# node files
# ---------------------------------------------------------------------------

def write_nodes(mesh: Union[Grid2D, JaggedMesh], path) -> None:
    """Plain-text node dump.

    Grid2D: header ``# grid2d <n1> <n2>`` then ``a1 a2`` per node (a1 fastest).
    JaggedMesh: header ``# jagged <orientation> <rows>`` then
    ``<row> <anchor> <coordinate>`` per node.  Values use 17 significant
    digits, which round-trips doubles exactly.
    """
    with open(path, "w") as fh:
        if isinstance(mesh, Grid2D):
            n1, n2 = len(mesh.axis1), len(mesh.axis2)
            fh.write(f"# grid2d {n1} {n2}\n")
            for b in mesh.axis2.points:
                for a in mesh.axis1.points:
                    fh.write(f"{a:.17g} {b:.17g}\n")
        else:
            fh.write(f"# jagged {mesh.orientation} {len(mesh.rows)}\n")
            for i, r in enumerate(mesh.rows):
                for x in r.line.points:
                    fh.write(f"{i} {r.anchor:.17g} {x:.17g}\n")


def read_nodes(path) -> Union[Grid2D, JaggedMesh]:
    with open(path) as fh:
        header = fh.readline().split()
        body = np.loadtxt(fh, ndmin=2)
    if len(header) != 4 or header[0] != "#":
        raise SetupError(f"{path}: not a node file")
    if header[1] == "grid2d":
        n1, n2 = int(header[2]), int(header[3])
        if body.shape != (n1 * n2, 2):
            raise SetupError(f"{path}: expected {n1 * n2} coordinate pairs")
        return Grid2D(Axis1D(body[:n1, 0]), Axis1D(body[::n1, 1]))
    if header[1] == "jagged":
        orientation, nrows = int(header[2]), int(header[3])
        idx = body[:, 0].astype(int)
        rows = []
        for i in range(nrows):
            sel = body[idx == i]
            rows.append(JaggedRow(float(sel[0, 1]), Axis1D(sel[:, 2])))
        return JaggedMesh(tuple(rows), orientation)
    raise SetupError(f"{path}: unknown mesh kind {header[1]!r}")
