"""Variable transformations.

* conservative <-> advective field scaling (``f_hat = G f``),
* monotone coordinate maps ``a_tilde(a) = int_0^a da'/G(a')`` and time maps
  ``t_tilde(t) = int_0^t G(t') dt'`` with their inverses,
* integrating factors ``mu`` that absorb a linear sink ``-lambda f``.

Quadrature maps tabulate a composite Simpson rule at the panel boundaries;
evaluation between boundaries adds one local Simpson panel, and the inverse
is a bracketing table lookup with linear interpolation followed by a few
Newton steps (the derivative of the map is the integrand itself).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .core import (ClosedForm, Coupled, Field2D, GrowthSpec, LinearSink, _evaluate)
from .errors import DomainError, PBMError, SetupError

DEFAULT_PANELS = 4096
MU_PANELS = 256
_NEWTON_ITERS = 8


class MonotoneMap:
    """Strictly increasing map ``F(x) = int_0^x w(s) ds`` on ``[0, L]`` with ``w > 0``.

    ``provenance`` is ``"analytical"`` when a closed form was supplied and
    ``"quadrature"`` otherwise.  ``forward``/``inverse`` accept arrays.
    Evaluation slightly outside ``[0, L]`` is allowed (the integrand must be
    defined there); the tabulation itself only covers ``[0, L]``.
    """

    def __init__(self, integrand: Callable, L: float, closed: Optional[ClosedForm] = None,
                 n_panels: int = DEFAULT_PANELS):
        if not (L > 0 and np.isfinite(L)):
            raise SetupError(f"map length must be positive, got {L}")
        if n_panels < 1:
            raise SetupError("n_panels must be >= 1")
        self.integrand = integrand
        self.L = float(L)
        self.closed = closed
        self.n_panels = int(n_panels)
        self.provenance = "analytical" if closed is not None else "quadrature"
        self.tol = (1e-10 if closed is not None else 1e-6) * self.L

        # the integrand is sampled densely either way: it doubles as the
        # positivity check and feeds the Newton inverse
        x = np.linspace(0.0, self.L, 2 * self.n_panels + 1)
        w = _evaluate(integrand, x)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            i = int(np.argmax(~np.isfinite(w) | (w <= 0)))
            raise DomainError(f"map integrand not positive/finite at x={x[i]:g} (value {w[i]:g})")
        if closed is None:
            H = self.L / self.n_panels
            panel = H / 6.0 * (w[0:-1:2] + 4.0 * w[1::2] + w[2::2])
            self._nodes = x[::2]
            self._table = np.concatenate([[0.0], np.cumsum(panel)])
            if np.any(np.diff(self._table) <= 0):
                raise PBMError("quadrature tabulation is not monotone")
            self._H = H

    # -- evaluation ---------------------------------------------------------

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.closed is not None:
            return np.asarray(self.closed.forward(x), dtype=float) + 0.0 * x
        k = np.clip(np.floor(x / self._H).astype(int), 0, self.n_panels - 1)
        x0 = self._nodes[k]
        xm = 0.5 * (x0 + x)
        w0, wm, w1 = (_evaluate(self.integrand, v) for v in (x0, xm, x))
        return self._table[k] + (x - x0) / 6.0 * (w0 + 4.0 * wm + w1)

    def derivative(self, x) -> np.ndarray:
        return _evaluate(self.integrand, np.asarray(x, dtype=float))

    def inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.closed is not None and self.closed.inverse is not None:
            return np.asarray(self.closed.inverse(y), dtype=float) + 0.0 * y
        x = self._initial_guess(y)
        for _ in range(_NEWTON_ITERS):
            step = (self.forward(x) - y) / self.derivative(x)
            x = x - step
            if np.all(np.abs(step) <= 4e-16 * self.L):
                break
        return x

    def _initial_guess(self, y):
        if self.closed is None:
            nodes, table = self._nodes, self._table
        else:
            nodes = np.linspace(0.0, self.L, 257)
            table = self.forward(nodes)
        k = np.clip(np.searchsorted(table, y) - 1, 0, table.size - 2)
        frac = (y - table[k]) / (table[k + 1] - table[k])
        return nodes[k] + frac * (nodes[k + 1] - nodes[k])

    @property
    def total(self) -> float:
        """``F(L)``."""
        return float(self.forward(self.L))

    def __call__(self, x):
        return self.forward(x)


def make_coordinate_map(G: Callable, L: float, antiderivative: Optional[ClosedForm] = None,
                        n_panels: int = DEFAULT_PANELS) -> MonotoneMap:
    """``a_tilde(a) = int_0^a da'/G(a')`` on ``[0, L]``."""
    x = np.linspace(0.0, float(L), 2 * int(n_panels) + 1) if L > 0 else np.zeros(1)
    g = _evaluate(G, x)
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        i = int(np.argmax(~np.isfinite(g) | (g <= 0)))
        raise DomainError(f"growth rate not positive at a={x[i]:g} (value {g[i]:g})")
    return MonotoneMap(lambda a: 1.0 / _evaluate(G, a), L, antiderivative, n_panels)


def make_time_map(G_t: Callable, t_end: float, antiderivative: Optional[ClosedForm] = None,
                  n_panels: int = DEFAULT_PANELS) -> MonotoneMap:
    """``t_tilde(t) = int_0^t G_t(t') dt'`` on ``[0, t_end]``."""
    return MonotoneMap(G_t, t_end, antiderivative, n_panels)


# ---------------------------------------------------------------------------
# conservative <-> advective scaling
# ---------------------------------------------------------------------------

def advective_scale(growth: GrowthSpec, a1, a2, axis_scope: Union[str, int] = "both", t: float = 0.0):
    """Multiplier turning ``f`` into ``f_hat``.

    Commuting classes use the size factors ``S_1(a_1) S_2(a_2)`` (time factors
    do not enter the conservative derivative); ``axis_scope`` 1 or 2 keeps a
    single factor, which is how the coupled sub-problems are scaled.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if isinstance(growth, Coupled):
        if axis_scope not in (1, 2):
            raise SetupError("coupled growth is scaled per sub-problem: axis_scope must be 1 or 2")
        g = growth.rates(t, a1, a2)[axis_scope - 1]
    else:
        s1 = np.broadcast_to(growth.size_factor(1, a1), np.broadcast_shapes(a1.shape, a2.shape))
        s2 = np.broadcast_to(growth.size_factor(2, a2), s1.shape)
        g = {"both": s1 * s2, 1: s1, 2: s2}.get(axis_scope)
        if g is None:
            raise SetupError(f"axis_scope must be 'both', 1 or 2, got {axis_scope!r}")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise DomainError("growth factor not positive at some node")
    return g


def to_advective(field: Field2D, growth: GrowthSpec, axis_scope="both", t: float = 0.0) -> Field2D:
    A1, A2 = field.grid.mesh()
    return Field2D(field.grid, field.values * advective_scale(growth, A1, A2, axis_scope, t))


def from_advective(field_hat: Field2D, growth: GrowthSpec, axis_scope="both", t: float = 0.0) -> Field2D:
    A1, A2 = field_hat.grid.mesh()
    return Field2D(field_hat.grid, field_hat.values / advective_scale(growth, A1, A2, axis_scope, t))


# ---------------------------------------------------------------------------
# integrating factors for linear sinks
# ---------------------------------------------------------------------------

def _path_integral(fn, upper, n_panels):
    """Composite Simpson of ``int_0^upper fn(s) ds`` for every entry of ``upper``.

    ``fn`` receives the node array of shape ``(m, 2n+1)`` (one row per point,
    scaled to that point's interval) plus the row indices.
    """
    upper = np.asarray(upper, dtype=float)
    flat = upper.ravel()
    u = np.linspace(0.0, 1.0, 2 * n_panels + 1)
    w = np.ones_like(u)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 6.0 * n_panels
    out = np.empty_like(flat)
    chunk = max(1, 400000 // u.size)
    for s in range(0, flat.size, chunk):
        rows = slice(s, min(s + chunk, flat.size))
        nodes = flat[rows, None] * u[None, :]
        vals = fn(nodes, rows)
        out[rows] = flat[rows] * (vals @ w)
    return out.reshape(upper.shape)


@dataclass(frozen=True)
class MuFunction:
    """Integrating factor ``mu(t, a1, a2)`` with ``mu_t + g1 mu_a1 + g2 mu_a2 = lambda mu``.

    ``feet(t, a1, a2)`` returns the characteristic feet the row integrates
    along (``(a1 - g1 t, a2 - g2 t)`` for the time rows, ``(None,
    a2 - (g2/g1) a1)`` for the ``(a1, a2)`` row, ``(None, None)`` otherwise).
    """

    form: str
    g1: float
    g2: float
    log_mu: Callable
    branch: str = "t"

    def __call__(self, t, a1, a2) -> np.ndarray:
        return np.exp(self.log_mu(t, a1, a2))

    def feet(self, t, a1, a2) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
        if self.form in ("t,a1", "t,a2", "t,a1,a2"):
            f1 = a1 - self.g1 * t if "a1" in self.form else None
            f2 = a2 - self.g2 * t if "a2" in self.form else None
            return f1, f2
        if self.form == "a1,a2":
            return None, a2 - (self.g2 / self.g1) * a1
        return None, None


def make_mu(sink: LinearSink, g1: float, g2: float, n_panels: int = MU_PANELS) -> MuFunction:
    """Build the integrating factor for ``sink`` under constant growth ``(g1, g2)``."""
    if g1 < 0 or g2 < 0:
        raise SetupError("growth rates must be non-negative")
    form = sink.form
    lam = sink.lam

    def L(t, a1, a2):
        return _evaluate(lam, t, a1, a2)

    if sink.mu is not None:
        closed = sink.mu
        return MuFunction(form, g1, g2, lambda t, a1, a2: np.log(_evaluate(closed, t, a1, a2)), sink.branch)

    def need(g, name):
        if not g > 0:
            raise SetupError(f"lambda form {form!r} divides by {name}; it must be > 0")

    if form == "constant":
        branch = sink.branch
        if branch == "a1":
            need(g1, "g1")
        if branch == "a2":
            need(g2, "g2")

        def log_mu(t, a1, a2):
            t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
            c = L(0.0 * t, 0.0 * t, 0.0 * t)
            return {"t": c * t, "a1": c * a1 / (g1 or 1.0), "a2": c * a2 / (g2 or 1.0)}[branch]

    elif form in ("a1", "a2"):
        g = g1 if form == "a1" else g2
        need(g, "g1" if form == "a1" else "g2")

        def log_mu(t, a1, a2):
            t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
            if form == "a1":
                return _path_integral(lambda s, rows: L(0.0 * s, s, 0.0 * s), a1, n_panels) / g
            return _path_integral(lambda s, rows: L(0.0 * s, 0.0 * s, s), a2, n_panels) / g

    elif form == "t":
        def log_mu(t, a1, a2):
            t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
            return _path_integral(lambda s, rows: L(s, 0.0 * s, 0.0 * s), t, n_panels)

    elif form in ("t,a1", "t,a2", "t,a1,a2"):
        def log_mu(t, a1, a2):
            t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
            f1 = (a1 - g1 * t).ravel()
            f2 = (a2 - g2 * t).ravel()
            use1 = "a1" in form
            use2 = "a2" in form

            def fn(s, rows):
                b1 = g1 * s + f1[rows, None] if use1 else 0.0 * s
                b2 = g2 * s + f2[rows, None] if use2 else 0.0 * s
                return L(s, b1, b2)
            return _path_integral(fn, t, n_panels)

    elif form == "a1,a2":
        need(g1, "g1")

        def log_mu(t, a1, a2):
            t, a1, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, a1, a2)))
            f2 = (a2 - (g2 / g1) * a1).ravel()
            fn = lambda s, rows: L(0.0 * s, s, (g2 / g1) * s + f2[rows, None])
            return _path_integral(fn, a1, n_panels) / g1
    else:  # pragma: no cover - LinearSink validates the form
        raise SetupError(f"unknown lambda form {form!r}")

    return MuFunction(form, g1, g2, log_mu, sink.branch)
