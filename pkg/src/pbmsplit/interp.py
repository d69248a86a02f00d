"""Resampling between structured grids and jagged meshes.

Every source mesh is treated as a stack of monotone lines at increasing
anchors (a ``Grid2D`` is the special case where all lines coincide).  A
target point is bracketed between source rows by its anchor coordinate,
interpolated along each bracketing row at its in-row coordinate, and the
row results are combined across anchors.  Coordinates outside a row (or
outside the anchor range) are clamped to the hull.

``order=1`` is separable linear interpolation: weights lie in [0, 1], so
the output never leaves the range of the input.  ``order=3`` uses 4-point
Lagrange stencils in both directions (one-sided near the ends); it is what
the splitting schemes use by default because linear resampling repeated
every step smears the solution faster than the splitting error shrinks.
"""

from __future__ import annotations

from typing import Sequence, Tuple, Union

import numpy as np

from .core import Grid2D, JaggedMesh
from .errors import InterpolationError, SetupError


def lagrange_weights(xs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lagrange basis weights for stencils ``xs`` (shape ``(m, p)``) at ``x`` (shape ``(m,)``)."""
    m, p = xs.shape
    w = np.ones((m, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                w[:, i] *= (x - xs[:, j]) / (xs[:, i] - xs[:, j])
    return w


def _stencil(nodes: np.ndarray, x: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices ``(m, p)`` and weights ``(m, p)`` into a sorted ``nodes`` array.

    ``x`` must already be clamped to ``[nodes[0], nodes[-1]]``.
    """
    n = nodes.size
    k = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, n - 2)
    if order == 1 or n < 4:
        x0 = nodes[k]
        t = (x - x0) / (nodes[k + 1] - x0)
        return np.stack([k, k + 1], axis=1), np.stack([1.0 - t, t], axis=1)
    s = np.clip(k - 1, 0, n - 4)
    idx = s[:, None] + np.arange(4)[None, :]
    w = lagrange_weights(nodes[idx], x)
    # nodes that coincide with a stencil point get exact unit weights
    hit = nodes[idx] == x[:, None]
    rows = hit.any(axis=1)
    if np.any(rows):
        w[rows] = hit[rows].astype(float)
    return idx, w


def _pad(idx, w, p):
    """Pad a stencil to width ``p`` with zero-weight copies (linear rows in a cubic resample)."""
    if idx.shape[1] == p:
        return idx, w
    extra = p - idx.shape[1]
    return (np.concatenate([idx, np.repeat(idx[:, :1], extra, axis=1)], axis=1),
            np.concatenate([w, np.zeros((w.shape[0], extra))], axis=1))


class _Lines:
    """Uniform view of a source mesh: anchors, lines and flat offsets."""

    def __init__(self, mesh: Union[Grid2D, JaggedMesh]):
        if isinstance(mesh, Grid2D):
            self.orientation = 1
            self.anchors = mesh.axis2.points
            self.lines = [mesh.axis1.points] * len(mesh.axis2)
        elif isinstance(mesh, JaggedMesh):
            self.orientation = mesh.orientation
            self.anchors = mesh.anchors
            self.lines = [r.line.points for r in mesh.rows]
        else:
            raise SetupError(f"cannot resample from {type(mesh).__name__}")
        self.offsets = np.concatenate([[0], np.cumsum([len(x) for x in self.lines])])
        self.size = int(self.offsets[-1])


def _target_coords(target) -> Tuple[np.ndarray, np.ndarray, tuple]:
    if isinstance(target, Grid2D):
        A1, A2 = target.mesh()
        return A1.ravel(), A2.ravel(), target.shape
    if isinstance(target, JaggedMesh):
        a1, a2 = target.coords()
        return a1, a2, a1.shape
    a1, a2 = (np.asarray(v, dtype=float) for v in target)
    a1, a2 = np.broadcast_arrays(a1, a2)
    return a1.ravel(), a2.ravel(), a1.shape


class Resampler:
    """Precomputed interpolation from ``source`` nodes to ``target`` points.

    ``target`` is a ``Grid2D``, a ``JaggedMesh`` or a pair of coordinate
    arrays.  Values are passed in the source's native layout (``(n2, n1)``
    for grids, flat row-by-row for jagged meshes) and returned in the
    target's (grid shape, flat, or the coordinate-array shape).
    ``out_of_hull`` is ``"clamp"`` or ``"error"``.
    """

    def __init__(self, source, target, order: int = 1, out_of_hull: str = "clamp"):
        if order not in (1, 3):
            raise SetupError(f"interpolation order must be 1 or 3, got {order}")
        if out_of_hull not in ("clamp", "error"):
            raise SetupError(f"out_of_hull must be 'clamp' or 'error', got {out_of_hull!r}")
        self.source = source
        self.target = target
        self.order = order
        src = _Lines(source)
        a1, a2, self.shape = _target_coords(target)
        self._coords = (a1, a2)
        along, cross = (a1, a2) if src.orientation == 1 else (a2, a1)

        anchors = src.anchors
        if out_of_hull == "error":
            lo = min(x[0] for x in src.lines)
            hi = max(x[-1] for x in src.lines)
            bad = (cross < anchors[0]) | (cross > anchors[-1]) | (along < lo) | (along > hi)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise InterpolationError(f"query ({a1[i]:g}, {a2[i]:g}) lies outside the source mesh")
        c = np.clip(cross, anchors[0], anchors[-1])
        ridx, rw = _stencil(anchors, c, order)
        p = 4 if order == 3 else 2
        ridx, rw = _pad(ridx, rw, p)

        m = along.size
        idx = np.zeros((m, p, p), dtype=np.intp)
        wts = np.zeros((m, p, p))
        for slot in range(p):
            rows = ridx[:, slot]
            for r in np.unique(rows):
                sel = np.nonzero(rows == r)[0]
                line = src.lines[r]
                x = np.clip(along[sel], line[0], line[-1])
                li, lw = _pad(*_stencil(line, x, order), p)
                idx[sel, slot, :] = src.offsets[r] + li
                wts[sel, slot, :] = rw[sel, slot, None] * lw
        self._idx = idx.reshape(m, p * p)
        self._w = wts.reshape(m, p * p)
        self._source_size = src.size

    def __call__(self, values) -> np.ndarray:
        flat = np.asarray(values, dtype=float).ravel()
        if flat.size != self._source_size:
            raise SetupError(f"expected {self._source_size} source values, got {flat.size}")
        out = np.einsum("ij,ij->i", flat[self._idx], self._w)
        if not np.all(np.isfinite(out)):
            i = int(np.argmax(~np.isfinite(out)))
            raise InterpolationError(
                f"resampling produced a non-finite value at a1={self._coords[0][i]:g}, "
                f"a2={self._coords[1][i]:g}")
        return out.reshape(self.shape)


def bilinear(grid: Grid2D, values, query: Sequence[float], out_of_hull: str = "clamp") -> float:
    """Tensor-product linear interpolation of grid values at one point."""
    r = Resampler(grid, (np.array([query[0]]), np.array([query[1]])), 1, out_of_hull)
    return float(r(values)[0])


def jagged_resample(source: JaggedMesh, values, target: Union[JaggedMesh, Grid2D],
                    order: int = 1) -> np.ndarray:
    """One-shot resample between meshes (builds a throwaway ``Resampler``)."""
    return Resampler(source, target, order)(values)


class AxisResampler:
    """Per-line 1D interpolation along one axis of a ``(n2, n1)`` array.

    Every line shares the node array ``nodes``; ``query`` has the array's
    shape and gives, for each node, the in-line coordinate to sample.
    Queries below ``nodes[0]`` return ``below`` (the inflow value); queries
    above the last node clamp.
    """

    def __init__(self, nodes: np.ndarray, query: np.ndarray, axis: int, order: int = 3,
                 below: float = 0.0):
        nodes = np.asarray(nodes, dtype=float)
        q = np.asarray(query, dtype=float)
        ax = 1 if axis == 1 else 0
        qa = np.moveaxis(q, ax, -1)
        self.axis = ax
        self.shape = q.shape
        flatq = qa.reshape(-1)
        self._outside = (flatq < nodes[0]).reshape(qa.shape)
        x = np.clip(flatq, nodes[0], nodes[-1])
        li, lw = _stencil(nodes, x, order)
        n_lines = qa.shape[0]
        line_of = np.repeat(np.arange(n_lines), qa.shape[1])
        self._idx = line_of[:, None] * nodes.size + li
        self._w = lw
        self._lines_shape = qa.shape
        self.below = below

    def __call__(self, values) -> np.ndarray:
        v = np.moveaxis(np.asarray(values, dtype=float), self.axis, -1)
        flat = np.ascontiguousarray(v).reshape(-1)
        out = np.einsum("ij,ij->i", flat[self._idx], self._w).reshape(self._lines_shape)
        out[self._outside] = self.below
        if not np.all(np.isfinite(out)):
            raise InterpolationError("line resampling produced a non-finite value")
        return np.moveaxis(out, -1, self.axis)
