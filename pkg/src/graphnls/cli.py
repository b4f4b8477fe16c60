"""Command-line entry point: ``graphnls <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 certificate FAILED.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from graphnls import __version__, energy as en, local_min as lm, model, quadrature, spectral
from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.errors import (ConvergenceError, GraphError, GraphNLSError, HypothesisError,
                             ConstraintError)
from graphnls.graph import MetricGraph, classify, load_graph, theorem_hypotheses
from graphnls.grid import GraphFunction, Grid

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CERT = 0, 2, 3, 4

log = logging.getLogger("graphnls")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    quad_tol: float = model.QUAD_TOL
    quad_budget: int = quadrature.DEFAULT_BUDGET
    outputs: list[Path] = field(default_factory=list)

    def validate(self) -> None:
        if not self.quad_tol > 0:
            raise UsageError("--quad-tol must be positive")
        if self.quad_budget < 15:
            raise UsageError("--quad-budget must allow at least one rule evaluation")
        for p in self.outputs:
            parent = p.resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise UsageError(f"cannot write {p}")

    def apply(self) -> None:
        model.QUAD_TOL = self.quad_tol
        quadrature.DEFAULT_BUDGET = self.quad_budget


def thread_cap() -> int:
    raw = os.environ.get("GRAPHNLS_THREADS", "")
    cpus = os.cpu_count() or 1
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"GRAPHNLS_THREADS must be an integer, got {raw!r}")
    return max(1, min(n, cpus))


# -- output helpers ----------------------------------------------------------------

def dump_json(obj: Any, path: str | Path | None = None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _fmt(v: float) -> str:
    return "%.12e" % v


def write_csv(header: list[str], rows, path: str | Path | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    if path is None or str(path) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue())


def profile_rows(u: GraphFunction):
    for name in u.grid.names:
        x, y = u.edge(name)
        for xi, yi in zip(x, y):
            yield name, float(xi), float(yi)


def read_profile(graph: MetricGraph, path: str | Path) -> GraphFunction:
    """Read an ``edge,x,u`` CSV on uniform per-edge grids into a GraphFunction."""
    data: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["edge", "x", "u"]:
            raise GraphError("profile CSV must have header edge,x,u")
        for row in reader:
            data.setdefault(row["edge"], []).append((float(row["x"]), float(row["u"])))
    names = graph.edge_names + graph.halfline_names
    missing = set(names) - set(data)
    extra = set(data) - set(names)
    if missing or extra:
        raise GraphError(f"profile edges do not match graph (missing {sorted(missing)}, "
                         f"unknown {sorted(extra)})")
    cells, spans, arrays = {}, {}, {}
    for name in names:
        pts = sorted(data[name])
        x = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        if x.size < 3 or x[0] != 0.0:
            raise GraphError(f"edge {name!r}: need at least 3 samples starting at x=0")
        steps = np.diff(x)
        if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, x[-1]):
            raise GraphError(f"edge {name!r}: samples are not uniformly spaced")
        if (x.size - 1) % 2:
            raise GraphError(f"edge {name!r}: need an even number of cells")
        cells[name] = x.size - 1
        spans[name] = x[-1]
        if name in graph.halfline_names:
            if abs(y[-1]) > 1e-8:
                raise GraphError(f"half-line {name!r} must end at 0 (got {y[-1]})")
            y[-1] = 0.0
        else:
            L = graph.edge(name).length
            if abs(x[-1] - L) > 1e-9 * max(1.0, L):
                raise GraphError(f"edge {name!r}: samples end at {x[-1]}, length is {L}")
        arrays[name] = y
    grid = Grid(graph, cells, {h: spans[h] for h in graph.halfline_names})
    return GraphFunction.from_edge_arrays(grid, arrays)


# -- subcommands -------------------------------------------------------------------

def cmd_classify(args) -> int:
    g = load_graph(args.graph, require_noncompact=True)
    out = classify(g).to_dict()
    out["hypotheses"] = theorem_hypotheses(g)
    dump_json(out, args.out)
    return EXIT_OK


def cmd_model_curve(args) -> int:
    c = model.mass_curve(args.zmin, args.zmax, args.samples, args.n, workers=thread_cap())
    write_csv(["z", "lambda", "mu", "mu_prime"], c.rows(), args.out)
    return EXIT_OK


def cmd_model_solve(args) -> int:
    s = model.build_profile(args.z, args.n, pendant_cells=args.cells,
                            halfline_cells=args.halfline_cells)
    write_csv(["edge", "x", "u"], profile_rows(s.profile), args.out)
    summary = {
        "z": s.z, "n": s.n, "Lambda": s.Lambda, "omega": s.omega, "mu": s.mu,
        "energy": s.energy, "H_of_y": s.H_of_y, "uM": s.uM, "y": s.y,
        "starred": {"phi_star": s.starred.phi_star, "H_star": s.starred.H_star,
                    "uM_star": s.starred.uM_star},
        "hamiltonian_drift": s.hamiltonian_drift,
    }
    if args.summary:
        dump_json(summary, args.summary)
    elif args.out not in (None, "-"):
        dump_json(summary)
    return EXIT_OK


def _band(n: int, zmin: float, zmax: float, samples: int) -> dict[str, Any]:
    c = model.mass_curve(zmin, zmax, samples, n, workers=thread_cap())
    lo, hi = c.band
    return {"n": n, "mu_min": c.mu_min, "z_at_min": c.z_at_min, "band": [lo, hi],
            "band_closed_left": True, "band_open_right": True,
            "interior_minimum": c.interior_min, "sampled_range": [zmin, zmax],
            "samples": samples}


def cmd_model_band(args) -> int:
    dump_json(_band(args.n, args.zmin, args.zmax, args.samples), args.out)
    return EXIT_OK


def cmd_energy(args) -> int:
    g = load_graph(args.graph)
    u = read_profile(g, args.profile)
    lam = args.lam if args.lam is not None else en.lagrange_multiplier(u)
    out: dict[str, Any] = {
        "energy": en.energy(u),
        "mass": en.mass(u),
        "core_mass": en.core_mass(u),
        "kinetic": en.kinetic(u),
        "potential": en.potential(u),
        "lambda": lam,
        "lambda_from_profile": args.lam is None,
        "residuals": en.residuals(u, lam).to_dict(),
    }
    if not g.compact:
        crit = classify(g).critical_mass
        if crit.known:
            c = en.gn_check(u, crit.lo)
            out["gn"] = {"lhs": c.lhs, "rhs": c.rhs, "satisfied": c.satisfied, "mu_G": crit.lo}
    dump_json(out, args.out)
    return EXIT_OK


def cmd_minimize(args) -> int:
    g = load_graph(args.graph, require_noncompact=True)
    spec = lm.ConstraintSpec(args.mu, args.eta, args.delta)
    opts = lm.DescentOptions(max_iter=args.max_iter, tol=args.tol,
                             check_hypotheses=not args.no_check)
    grid = lm.default_grid(g, h=args.h, halfline_length=args.halfline_length,
                           h_halfline=args.h_halfline)
    init: GraphFunction | str = "auto"
    if args.init != "auto":
        init = read_profile(g, args.init)
    rep = lm.minimize(g, spec, init, grid=grid, options=opts)
    cert = lm.certify(rep, morse=args.morse)
    out = rep.to_dict()
    out["certificate"] = cert
    dump_json(out, args.out)
    if args.profile_out:
        write_csv(["edge", "x", "u"], profile_rows(rep.minimizer), args.profile_out)
    if not rep.converged:
        log.error("descent stopped (%s) without a stationary state", rep.stop_reason)
        return EXIT_NUMERIC
    return EXIT_OK if cert["status"] == "PASS" else EXIT_CERT


def cmd_spectrum(args) -> int:
    sol = model.build_profile(args.z, args.n, pendant_cells=args.cells,
                              halfline_cells=args.halfline_cells)
    u = sol.profile
    if not args.no_refine:
        u, _ = en.newton_stationary(u, omega=sol.omega)
    blocks = ["real", "imag"] if args.block == "both" else [args.block]
    out: dict[str, Any] = {"z": args.z, "n": args.n, "omega": sol.omega, "unknowns": u.grid.n_nodes,
                           "refined": not args.no_refine, "sign_tol": spectral.SIGN_TOL}
    w = np.asarray(u.grid.weights)
    for b in blocks:
        op = spectral.assemble(u, sol.omega, b)
        vals, vecs = spectral.eigs(op, args.k)
        entry = {"eigenvalues": vals.tolist(), "negative_count": spectral.morse_index(vals)}
        if b == "imag":
            entry["kernel_gap"] = float(abs(vals[0]))
            entry["kernel_cosine"] = spectral.cosine(vecs[:, 0], u.values, w)
        else:
            entry["form_at_profile"] = op.quadratic_form(u.values)
            entry["form_expected"] = -4.0 * float(w @ u.values ** 6)
        out[b] = entry
    dump_json(out, args.out)
    return EXIT_OK


def cmd_gss(args) -> int:
    r = spectral.gss_verdict(args.z, args.n, k=args.k, pendant_cells=args.cells,
                             halfline_cells=args.halfline_cells, refine=not args.no_refine)
    dump_json(r.to_dict(), args.out)
    return EXIT_OK


def reproduce_figure4(samples: int = 400, n: int = 0, z_lo: float = 0.05, z_hi: float = 12.0,
                      workers: int = 1) -> tuple[model.MassCurve, dict[str, Any]]:
    """Mass curve over [z_lo, z_hi] plus its summary (minimum, band, asymptotes)."""
    c = model.mass_curve(z_lo, z_hi, samples, n, workers=workers)
    lo, hi = c.band
    summary: dict[str, Any] = {
        "n": n, "samples": samples, "z_range": [z_lo, z_hi],
        "mu_min": c.mu_min, "z_at_min": c.z_at_min, "band": [lo, hi],
        "mu_line": MU_LINE, "mu_halfline": MU_HALFLINE,
        "mu_first": float(c.mu[0]), "mu_last": float(c.mu[-1]),
        "sampled_local_minima": c.local_minima,
    }
    if n >= 1:
        summary["rotation_mass_ends"] = [
            model.family_integrals(z_lo).rotation_mass,
            model.family_integrals(z_hi).rotation_mass,
        ]
    return c, summary


def cmd_fig4(args) -> int:
    c, summary = reproduce_figure4(args.samples, args.n, args.zmin, args.zmax, thread_cap())
    write_csv(["z", "lambda", "mu", "mu_prime"], c.rows(), args.out)
    dump_json(summary, args.summary)
    return EXIT_OK


def cmd_suite(args) -> int:
    from graphnls import suite

    echo = (lambda line: print(line, file=sys.stderr))
    if args.name == "acceptance":
        rep = suite.SuiteReport("acceptance", [])
        for fn in suite.ACCEPTANCE:
            c = fn(seed=args.seed) if fn is suite.check_properties else fn()
            echo(c.line)
            rep.checks.append(c)
    else:
        rep = suite.run_suite(args.name, echo=echo)
    dump_json(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


# -- parser ------------------------------------------------------------------------

def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return parse


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphnls", description=(
        "Stationary states of the critical NLS energy on metric graphs with half-lines."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--quad-tol", type=_positive(float), default=model.QUAD_TOL,
                   help="absolute tolerance of the model integrals (default %(default)g)")
    p.add_argument("--quad-budget", type=_positive(int), default=quadrature.DEFAULT_BUDGET,
                   help="integrand evaluations allowed per integral (default %(default)d)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="topology report of a graph")
    c.add_argument("--graph", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    m = sub.add_parser("model", help="explicit family on the tip graph")
    msub = m.add_subparsers(dest="model_command", required=True)
    mc = msub.add_parser("curve", help="sample z -> (Lambda, mu, mu')")
    mc.add_argument("--zmin", type=_positive(float), default=0.05)
    mc.add_argument("--zmax", type=_positive(float), default=12.0)
    mc.add_argument("--samples", type=int, default=400)
    mc.add_argument("--n", type=_nonneg_int, default=0)
    mc.add_argument("--out")
    mc.set_defaults(func=cmd_model_curve)
    ms = msub.add_parser("solve", help="one member u_z as an edge,x,u CSV")
    ms.add_argument("--z", type=_positive(float), required=True)
    ms.add_argument("--n", type=_nonneg_int, default=0)
    ms.add_argument("--cells", type=_positive(int), default=2000)
    ms.add_argument("--halfline-cells", type=_positive(int), default=2000)
    ms.add_argument("--out")
    ms.add_argument("--summary")
    ms.set_defaults(func=cmd_model_solve)
    mb = msub.add_parser("band", help="minimum of mu_n and the allowed band")
    mb.add_argument("--n", type=_nonneg_int, default=0)
    mb.add_argument("--zmin", type=_positive(float), default=0.05)
    mb.add_argument("--zmax", type=_positive(float), default=12.0)
    mb.add_argument("--samples", type=int, default=400)
    mb.add_argument("--out")
    mb.set_defaults(func=cmd_model_band)

    e = sub.add_parser("energy", help="energy, mass and residuals of a profile")
    e.add_argument("--graph", required=True)
    e.add_argument("--profile", required=True)
    e.add_argument("--lambda", dest="lam", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_energy)

    mn = sub.add_parser("minimize", help="local minimizer with core-mass floor")
    mn.add_argument("--graph", required=True)
    mn.add_argument("--mu", type=_positive(float), required=True)
    mn.add_argument("--eta", type=_positive(float))
    mn.add_argument("--delta", type=_positive(float), default=0.2)
    mn.add_argument("--init", default="auto")
    mn.add_argument("--max-iter", type=_positive(int), default=20000)
    mn.add_argument("--tol", type=_positive(float), default=1e-12)
    mn.add_argument("--h", type=_positive(float), default=2.5e-3, help="step on bounded edges")
    mn.add_argument("--h-halfline", type=_positive(float), default=1e-2)
    mn.add_argument("--halfline-length", type=_positive(float), default=20.0)
    mn.add_argument("--no-check", action="store_true",
                    help="skip the structural and data hypothesis checks")
    mn.add_argument("--morse", action="store_true", help="add a Morse-index clause")
    mn.add_argument("--out")
    mn.add_argument("--profile-out")
    mn.set_defaults(func=cmd_minimize)

    for name, fn, helptext in (("spectrum", cmd_spectrum, "low spectrum of the linearization"),
                               ("gss", cmd_gss, "Morse index and slope stability verdict")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--z", type=_positive(float), required=True)
        s.add_argument("--n", type=_nonneg_int, default=0)
        s.add_argument("--k", type=_positive(int), default=6)
        s.add_argument("--cells", type=_positive(int), default=2000)
        s.add_argument("--halfline-cells", type=_positive(int), default=2000)
        s.add_argument("--no-refine", action="store_true",
                       help="use the sampled profile, not the discrete stationary state")
        if name == "spectrum":
            s.add_argument("--block", choices=["real", "imag", "both"], default="both")
        s.add_argument("--out")
        s.set_defaults(func=fn)

    f = sub.add_parser("reproduce-fig4", help="mass curve on [0.05, 12] and its summary")
    f.add_argument("--samples", type=int, default=400)
    f.add_argument("--n", type=_nonneg_int, default=0)
    f.add_argument("--zmin", type=_positive(float), default=0.05)
    f.add_argument("--zmax", type=_positive(float), default=12.0)
    f.add_argument("--out", default="fig4_curve.csv")
    f.add_argument("--summary", default="fig4_summary.json")
    f.set_defaults(func=cmd_fig4)

    t = sub.add_parser("suite", help="run the acceptance or invariant checks")
    t.add_argument("name", choices=["acceptance", "invariants"])
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_suite)
    return p


def _outputs(args) -> list[Path]:
    out = []
    for attr in ("out", "summary", "profile_out"):
        v = getattr(args, attr, None)
        if v and v != "-":
            out.append(Path(v))
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    cfg = RunConfig(args.command, getattr(args, "seed", 0), args.quad_tol, args.quad_budget,
                    _outputs(args))
    saved = (model.QUAD_TOL, quadrature.DEFAULT_BUDGET)
    try:
        cfg.validate()
        if getattr(args, "samples", 2) < 2:
            raise UsageError("--samples must be at least 2")
        cfg.apply()
        return args.func(args)
    except UsageError as exc:
        print(f"graphnls: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, HypothesisError, ConstraintError, FileNotFoundError) as exc:
        print(f"graphnls: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphNLSError, ConvergenceError, ArithmeticError) as exc:
        print(f"graphnls: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        model.QUAD_TOL, quadrature.DEFAULT_BUDGET = saved


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
