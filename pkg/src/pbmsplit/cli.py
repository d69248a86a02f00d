"""Command-line front end.

    pbmsplit run --case case1 --scheme exact-analytical --n1 101 --n2 101
    pbmsplit converge --case case4 --scheme split-nonhomogeneous --ladder 51,101,201
    pbmsplit mesh --case case3 --dt 0.01 --out nodes.txt
    pbmsplit list

Any flag may also come from a TOML file given with ``--config`` (after the
subcommand); flags on the command line win.  Top-level keys use the flag
names with dashes or underscores (``n1``, ``dump_field``...).  A ``[problem]`` table defines a
custom problem when ``case = "custom"``::

    case = "custom"
    scheme = "exact-analytical"
    n1 = 101
    n2 = 101

    [problem]
    t_end = 1.0
    domain = [2.0, 2.0]

    [problem.growth]
    type = "per-axis"      # constant | per-axis | coupled
    g1 = [0.1, 0.05]       # constant: a number; per-axis: [c0, c1] -> c0 + c1*a1
    g2 = [0.5, 0.25]       # coupled: [c0, c1, c2] -> c0 + c1*a1 + c2*a2

    [problem.initial]      # Gaussian bump
    amplitude = 50.0
    centre = [0.4, 0.4]
    width = 0.005

Exit status: 0 on success, 2 for setup errors (bad arguments, incompatible
scheme), 3 for numerical failures (instability, non-finite values).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analytic
from .analytic import CASE_IDS, CaseDefinition, gaussian, get_case
from .core import ClosedForm, Constant, Coupled, PerAxis, ProblemSpec
from .errors import NumericalError, PBMError, SetupError
from .harness import convergence_study, run_case, write_field_csv, write_reports_csv
from .mesh import MeshBuildReport, build_jagged, build_nonuniform_cfl1, write_nodes
from .schemes import COMPATIBILITY, SchemeId, advance

EXIT_SETUP = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# custom problems from config
# ---------------------------------------------------------------------------

def _affine_map(c0, c1):
    """Closed form of int_0^a da'/(c0 + c1 a') and its inverse."""
    if c1 == 0:
        return ClosedForm(lambda a: np.asarray(a) / c0, lambda s: np.asarray(s) * c0)
    return ClosedForm(lambda a: np.log1p(c1 * np.asarray(a) / c0) / c1,
                      lambda s: c0 * np.expm1(c1 * np.asarray(s)) / c1)


def _affine_foot(k0, k_self, k_other, axis):
    """Foot of da_i/dt = k0 + k_self a_i + k_other a_j going back ``t`` with a_j frozen."""
    def foot(t, a1, a2):
        t = np.asarray(t, dtype=float)
        a_self, a_other = (a1, a2) if axis == 1 else (a2, a1)
        k = k0 + k_other * np.asarray(a_other, dtype=float)
        a_self = np.asarray(a_self, dtype=float)
        if k_self == 0:
            return a_self - k * t
        return (a_self + k / k_self) * np.exp(-k_self * t) - k / k_self
    return foot


def growth_from_config(cfg: dict):
    kind = cfg.get("type", "constant")
    g1, g2 = cfg.get("g1"), cfg.get("g2")
    if g1 is None or g2 is None:
        raise SetupError("growth config needs g1 and g2")
    if kind == "constant":
        return Constant(float(g1), float(g2))
    if kind == "per-axis":
        (a0, a1), (b0, b1) = (map(float, g1)), (map(float, g2))
        return PerAxis(lambda a: a0 + a1 * np.asarray(a), lambda a: b0 + b1 * np.asarray(a),
                       _affine_map(a0, a1), _affine_map(b0, b1))
    if kind == "coupled":
        (a0, a1, a2), (b0, b1, b2) = (map(float, g1)), (map(float, g2))
        return Coupled(lambda x, y: a0 + a1 * np.asarray(x) + a2 * np.asarray(y),
                       lambda x, y: b0 + b1 * np.asarray(x) + b2 * np.asarray(y),
                       foot1=_affine_foot(a0, a1, a2, 1), foot2=_affine_foot(b0, b2, b1, 2))
    raise SetupError(f"unknown growth type {kind!r} (constant | per-axis | coupled)")


def _per_axis_exact(growth: PerAxis, f0):
    """Solution through the closed-form maps: the feet sit at a_tilde_i(a_i) - t."""
    m1, m2 = growth.map1, growth.map2

    def exact(t, a1, a2):
        a1 = np.asarray(a1, dtype=float)
        a2 = np.asarray(a2, dtype=float)
        s1 = m1.forward(a1) - t
        s2 = m2.forward(a2) - t
        b1 = m1.inverse(np.maximum(s1, 0.0))
        b2 = m2.inverse(np.maximum(s2, 0.0))
        val = growth.G1(b1) * growth.G2(b2) * f0(b1, b2) / (growth.G1(a1) * growth.G2(a2))
        return np.where((s1 < 0) | (s2 < 0), 0.0, val)
    return exact


def problem_from_config(cfg: dict) -> CaseDefinition:
    growth = growth_from_config(cfg.get("growth", {}))
    ini = cfg.get("initial", {})
    amp = float(ini.get("amplitude", analytic.AMPLITUDE))
    centre = tuple(float(c) for c in ini.get("centre", (analytic.CENTRE, analytic.CENTRE)))
    width = float(ini.get("width", analytic.WIDTH))
    f0 = lambda a1, a2: gaussian(a1, a2, amp, centre, width)
    domain = tuple(float(x) for x in cfg.get("domain", (2.0, 2.0)))
    t_end = float(cfg.get("t_end", 1.0))
    exact = None
    if isinstance(growth, Constant):
        g = growth
        exact = lambda t, a1, a2: f0(np.asarray(a1) - g.g1 * t, np.asarray(a2) - g.g2 * t)
    elif isinstance(growth, PerAxis):
        exact = _per_axis_exact(growth, f0)
    return CaseDefinition("custom", ProblemSpec(growth, f0, domain, t_end), exact, "from config")


def resolve_case(name: str, config: dict, t_end: Optional[float]) -> CaseDefinition:
    if name == "custom":
        if "problem" not in config:
            raise SetupError("case 'custom' needs a [problem] table in the config file")
        case = problem_from_config(config["problem"])
    else:
        case = get_case(name)
    if t_end is not None:
        case = case.with_t_end(t_end)
    return case


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _options(args) -> dict:
    opts = {}
    if args.order is not None:
        opts["order"] = tuple(int(x) for x in args.order.split(","))
    for name in ("interp_order", "n_panels", "gamma", "source_order"):
        v = getattr(args, name, None)
        if v is not None:
            opts[name] = v
    return opts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbmsplit", description="Operator-splitting solvers for 2D PBMs")
    sub = p.add_subparsers(dest="command", required=True)

    def config_flag(sp):
        sp.add_argument("--config", help="TOML file supplying defaults for any flag")

    def common(sp):
        config_flag(sp)
        sp.add_argument("--case", choices=CASE_IDS + ("custom",))
        sp.add_argument("--scheme")
        sp.add_argument("--t-end", type=float, dest="t_end")
        sp.add_argument("--order", help="axis order for split schemes, '1,2' or '2,1'")
        sp.add_argument("--interp-order", type=int, choices=(1, 3), dest="interp_order")
        sp.add_argument("--n-panels", type=int, dest="n_panels")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--source-order", choices=("advection-first", "source-first"), dest="source_order")
        sp.add_argument("--out", help="write the error report(s) as CSV")

    r = sub.add_parser("run", help="run one case with one scheme and report RMSE/MAE")
    common(r)
    r.add_argument("--n1", type=int, default=101)
    r.add_argument("--n2", type=int, default=101)
    r.add_argument("--dt", type=float)
    r.add_argument("--dump-field", dest="dump_field", help="write the final field as a1,a2,value CSV")

    c = sub.add_parser("converge", help="convergence study over a resolution ladder")
    common(c)
    c.add_argument("--ladder", help="comma-separated node counts per axis, e.g. 51,101,201")
    c.add_argument("--dts", help="comma-separated time steps (one per rung)")

    m = sub.add_parser("mesh", help="write a backward-marched mesh as a node file")
    config_flag(m)
    m.add_argument("--case", choices=CASE_IDS + ("custom",))
    m.add_argument("--dt", type=float)
    m.add_argument("--gamma", type=float, default=0.5)
    m.add_argument("--axis", type=int, choices=(1, 2), default=1, help="line direction for jagged meshes")
    m.add_argument("--termination", choices=("prepend-zero", "last-positive"), default="prepend-zero")
    m.add_argument("--out")

    ls = sub.add_parser("list", help="list cases, schemes and the compatibility table")
    config_flag(ls)
    p.subcommands = {"run": r, "converge": c, "mesh": m, "list": ls}
    return p


def _load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise SetupError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise SetupError(f"bad config {path}: {exc}") from exc


def parse_args(argv: Optional[Sequence[str]] = None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    config = {}
    if args.config:
        config = _load_config(args.config)
        flat = {k.replace("-", "_"): v for k, v in config.items() if not isinstance(v, dict)}
        # re-parse with config values as defaults so explicit flags still win
        for sp in parser.subcommands.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in flat.items() if k in known})
        args = parser.parse_args(argv)
    return args, config


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise SetupError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


def cmd_run(args, config) -> int:
    _require(args, "case", "scheme")
    case = resolve_case(args.case, config, args.t_end)
    if case.analytic is None and case.id != "case4":
        res = advance(case.problem, args.scheme, (args.n1, args.n2), args.dt, **_options(args))
        if args.dump_field:
            write_field_csv(res.final_field, args.dump_field)
        v = res.final_field.values
        print(f"{case.id} {SchemeId.parse(args.scheme).value} nodes={v.size} dt={res.dt_used:.6g} "
              f"steps={res.steps_taken} max={v.max():.6e} (no oracle: errors not computed)")
        return 0
    rep = run_case(case, args.scheme, (args.n1, args.n2), args.dt, dump_field=args.dump_field, **_options(args))
    print(f"{case.id} {rep.scheme.value} n1={rep.n1} n2={rep.n2} nodes={rep.nodes} dt={rep.dt:.6g} "
          f"rmse={rep.rmse:.6e} mae={rep.mae:.6e} time={rep.wall_time_seconds:.3f}s")
    if args.out:
        write_reports_csv([rep.row()], args.out)
    return 0


def cmd_converge(args, config) -> int:
    _require(args, "case", "scheme", "ladder")
    case = resolve_case(args.case, config, args.t_end)
    ladder = args.ladder if isinstance(args.ladder, list) else [int(x) for x in str(args.ladder).split(",")]
    dts = None
    if args.dts:
        dts = args.dts if isinstance(args.dts, list) else [float(x) for x in str(args.dts).split(",")]
    table = convergence_study(case, args.scheme, ladder, dts, **_options(args))
    for row in table.rows():
        print(f"n1={row['n1']:>4} n2={row['n2']:>4} dt={row['dt']:.6g} rmse={row['rmse']:.6e} "
              f"mae={row['mae']:.6e} order={row['observed_order'] or '-'}")
    if args.out:
        write_reports_csv(table.rows(), args.out)
    return 0


def cmd_mesh(args, config) -> int:
    _require(args, "case", "dt", "out")
    case = resolve_case(args.case, config, None)
    growth = case.problem.growth
    if isinstance(growth, Coupled):
        mesh = build_jagged(growth, case.problem.domain, args.dt, args.axis, args.termination)
    else:
        mesh = build_nonuniform_cfl1(growth, case.problem.domain, args.dt, args.gamma, args.termination)
    write_nodes(mesh, args.out)
    rep = MeshBuildReport.of(mesh)
    if hasattr(mesh, "axis1"):
        print(f"grid {len(mesh.axis1)} x {len(mesh.axis2)} nodes={rep.node_count}")
    else:
        print(f"jagged rows={len(mesh.rows)} nodes={rep.node_count}")
    return 0


def cmd_list(args, config) -> int:
    print("cases:")
    for cid in CASE_IDS:
        print(f"  {cid:<10} {get_case(cid).description}")
    print("schemes (growth kinds; source kinds):")
    for s in SchemeId:
        g, src = COMPATIBILITY[s]
        print(f"  {s.value:<30} {', '.join(sorted(g))}; {', '.join(sorted(src))}")
    return 0


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "mesh": cmd_mesh, "list": cmd_list}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args, config = parse_args(argv)
    except SetupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SETUP
    try:
        return COMMANDS[args.command](args, config)
    except SetupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SETUP
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PBMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
