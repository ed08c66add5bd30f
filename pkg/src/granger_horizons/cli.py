"""Command-line interface: ``simulate``, ``fit``, ``gc`` and ``reproduce``.

Time-series CSV files hold one row per time step and one column per variable.
Variable indices on the command line and in output files are 1-based.

Exit codes: 0 success, 2 usage/validation (including unstable models),
3 I/O failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .demo import DemoModelSpec, causal_cells
from .errors import GrangerError, NumericalError
from .estimation import fit_var_ols, order_criteria
from .gc import (
    FULLFUTURE_HMAX,
    FULLFUTURE_TOL,
    Partition,
    gc_fullfuture,
    gc_graph,
    gc_graph_analytic,
    multistep_curve,
    _Analytic,
)
from .inference import SignificanceSpec, critical_level
from .io import graph_to_csv, graph_to_json, load_model, read_series_csv, save_model, write_series_csv
from .simulation import simulate
from .var_model import VARModel

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

REPRO_T = 1000
REPRO_P = 20
REPRO_ALPHA = 0.05
REPRO_HORIZONS = 32
DEFAULT_Q = 175


class UsageError(Exception):
    pass


def parse_range(text: str) -> list[int]:
    """Parse ``"1..32"``, ``"1,2,5"`` or a mix such as ``"1..4,8"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                a, b = part.split("..")
                lo, hi = int(a), int(b)
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None
    if not out or min(out) < 1:
        raise UsageError(f"range {text!r} must contain positive integers")
    return out


def _q_arg(text: str) -> Optional[int]:
    if text == "auto":
        return None
    q = int(text)
    if q < 1:
        raise argparse.ArgumentTypeError("q must be >= 1 or 'auto'")
    return q


def resolve_seed(seed: Optional[int]) -> int:
    env = os.environ.get("GRANGER_SEED")
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"GRANGER_SEED={env!r} is not an integer") from None
    if seed is None:
        seed = 0
    if not 0 <= seed < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return seed


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_model_arg(args) -> VARModel:
    if getattr(args, "demo", False):
        return DemoModelSpec(args.rho_self).build()
    if not args.model:
        raise UsageError("need --model PATH (or --demo)")
    return load_model(args.model)


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.T < 1:
        raise UsageError("--T must be >= 1")
    model = _load_model_arg(args)
    seed = resolve_seed(args.seed)
    ts = simulate(model, args.T, seed, burnin=args.burnin)
    if args.output in (None, "-"):
        buf = _io.StringIO()
        buf.write(",".join(f"v{i + 1}" for i in range(ts.n)) + "\n")
        for row in ts.data:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        sys.stdout.write(buf.getvalue())
    else:
        write_series_csv(ts, args.output)
    print(f"model_hash={ts.meta['model_hash']} seed={seed} burnin={ts.meta['burnin']}",
          file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    if not args.data:
        raise UsageError("need --data PATH")
    ts = read_series_csv(args.data)
    report: dict = {}
    if args.p is not None:
        p = args.p
        report["selection"] = None
    else:
        crit = order_criteria(ts, args.pmax, args.criterion)
        finite = {k: v for k, v in crit.items() if np.isfinite(v)}
        if not finite:
            raise UsageError("no order in 1..pmax can be fitted to this series")
        p = min(finite, key=lambda k: (finite[k], k))
        report["selection"] = {
            "criterion": args.criterion,
            "pmax": args.pmax,
            "values": {str(k): (float(v) if np.isfinite(v) else None) for k, v in crit.items()},
        }
    fit = fit_var_ols(ts, p)
    report.update({"p": p, "logdet": fit.logdet, "N": fit.N})
    model = fit.model
    if args.output in (None, "-"):
        _emit(json.dumps({"model": model.to_dict(), "report": report}, indent=1) + "\n", None)
    else:
        save_model(model, args.output)
        rep = args.report or str(Path(args.output).with_suffix("")) + ".report.json"
        Path(rep).write_text(json.dumps(report, indent=1) + "\n")
    return EXIT_OK


def _pairs_arg(args, n: int) -> Optional[list[tuple[int, int]]]:
    if args.x is None and args.y is None:
        return None
    xs = [args.x] if args.x is not None else list(range(1, n + 1))
    ys = [args.y] if args.y is not None else list(range(1, n + 1))
    for v in xs + ys:
        if not 1 <= v <= n:
            raise UsageError(f"variable index {v} outside 1..{n}")
    pairs = [(x - 1, y - 1) for x in xs for y in ys if x != y]
    if not pairs:
        raise UsageError("--x and --y must differ")
    return pairs


def cmd_gc(args) -> int:
    correction = "bonferroni" if args.bonferroni else args.correction
    horizons = parse_range(args.h) if args.h else [1]
    if args.analytic:
        model = _load_model_arg(args)
        lags = parse_range(args.tau) if args.tau else None
        g = gc_graph_analytic(model, args.variant, horizons=horizons, lags=lags,
                              alpha=args.alpha, correction=correction,
                              pairs=_pairs_arg(args, model.n), tol=args.tol, hmax=args.hmax,
                              q=args.q, jobs=args.jobs)
    else:
        if not args.data:
            raise UsageError("need --data PATH (or --analytic with --model)")
        if args.p is None:
            raise UsageError("need --p for sample GC")
        ts = read_series_csv(args.data)
        if args.variant == "multistep" and max(horizons) > args.p:
            raise UsageError("multi-step horizons must not exceed --p")
        g = gc_graph(ts, args.p, args.variant, horizons=horizons, alpha=args.alpha,
                     correction=correction, pairs=_pairs_arg(args, ts.n), tol=args.tol,
                     hmax=args.hmax, q=args.q, jobs=args.jobs)
    text = graph_to_csv(g) if args.format == "csv" else graph_to_json(g)
    _emit(text, args.output)
    return EXIT_OK


def _csv_text(header: Sequence[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def reproduce_fig2(model, q: Optional[int], tol: float, hmax: int) -> str:
    """Analytic multi-step and full-future GC for every directed pair, ``h = 1..32``.

    ``pair`` is written ``source->target`` with 1-based indices.
    """
    an = _Analytic(model, q)
    H = REPRO_HORIZONS
    rows = []
    for x in range(model.n):
        for y in range(model.n):
            if x == y:
                continue
            part = Partition.make(model.n, [x], [y])
            ms = multistep_curve(model, part, range(1, H + 1), _cache=an)
            ffv = gc_fullfuture(model, part, tol, max(hmax, H), hmin=H, _cache=an).values
            for h in range(1, H + 1):
                rows.append((f"{y + 1}->{x + 1}", h, float(ms[h - 1].value), float(ffv[h - 1])))
    return _csv_text(("pair", "h", "F_multistep", "F_fullfuture"), rows)


def reproduce_fig3(model, seed: int, q: Optional[int], jobs: int) -> tuple[str, dict]:
    ts = simulate(model, REPRO_T, seed)
    sample = gc_graph(ts, REPRO_P, "singlelag", alpha=REPRO_ALPHA, correction="bonferroni", jobs=jobs)
    analytic = gc_graph_analytic(model, "singlelag", q=q, jobs=jobs)
    crit = critical_level(SignificanceSpec(REPRO_ALPHA, "bonferroni", sample.m), sample.N, 1)
    rows = []
    for c in sample.cells:
        a = analytic.cell(c.x, c.y, tau=c.tau)
        rows.append((c.x + 1, c.y + 1, c.tau, float(c.F), float(a.F), crit, int(c.significant)))
    text = _csv_text(("x", "y", "tau", "F_sample", "F_analytic", "critical_level", "significant"), rows)
    info = {
        "T": REPRO_T, "p": REPRO_P, "N": sample.N, "m": sample.m, "alpha": REPRO_ALPHA,
        "correction": "bonferroni", "critical_level": crit, "q": analytic.extra["q"],
        "burnin": ts.meta["burnin"], "model_hash": ts.meta["model_hash"],
        "significant_cells": [[c.x + 1, c.y + 1, c.tau] for c in sample.significant_cells()],
    }
    return text, info


def cmd_reproduce(args) -> int:
    seed = resolve_seed(args.seed if args.seed is not None else 1)
    spec = DemoModelSpec(args.rho_self)
    model = spec.build()
    outdir = Path(args.output or "reproduce")
    fig2 = reproduce_fig2(model, args.q, args.tol, args.hmax)
    fig3, info = reproduce_fig3(model, seed, args.q, args.jobs)
    manifest = {
        "version": __version__,
        "seed": seed,
        "demo_model": spec.to_dict(),
        "true_cells": [[x + 1, y + 1, lag] for x, y, lag in causal_cells()],
        "fig2": {"horizons": REPRO_HORIZONS, "tol": args.tol, "hmax": max(args.hmax, REPRO_HORIZONS),
                 "q": args.q, "pair_label": "source->target"},
        "fig3": info,
    }
    # single writer, after every cell is computed
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "fig2.csv").write_text(fig2)
    (outdir / "fig3.csv").write_text(fig3)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {outdir}/fig2.csv, fig3.csv, manifest.json "
          f"({len(info['significant_cells'])} significant cells)", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message short
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="VAR model JSON {n, p, A[lag-1][row][col], Sigma}")
    common.add_argument("--data", help="time-series CSV: rows = time, columns = variables")
    common.add_argument("-o", "--output", help="output path (default: standard output)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed; GRANGER_SEED overrides")
    common.add_argument("--jobs", type=int, default=1, help="concurrent GC cells")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    demo = argparse.ArgumentParser(add_help=False)
    demo.add_argument("--demo", action="store_true", help="use the built-in 5-variable demo model")
    demo.add_argument("--rho-self", type=float, default=DemoModelSpec.rho_self,
                      help="demo lag-1 self-coefficient (default %(default)s)")

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--q", type=_q_arg, default=DEFAULT_Q,
                         help="autocovariance lags for analytic reduced models, or 'auto' "
                              "(default %(default)s)")
    numeric.add_argument("--tol", type=float, default=FULLFUTURE_TOL,
                         help="full-future convergence tolerance")
    numeric.add_argument("--hmax", type=int, default=FULLFUTURE_HMAX,
                         help="full-future horizon cap")

    parser = _Parser(prog="granger-horizons", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common, demo], help="simulate a VAR model to CSV")
    p.add_argument("--T", type=int, required=True, help="retained samples")
    p.add_argument("--burnin", type=int, help="discarded warm-up samples")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="OLS VAR fit with optional order selection")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--p", type=int, help="model order")
    g.add_argument("--pmax", type=int, help="select the order in 1..pmax")
    p.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p.add_argument("--report", help="report JSON path (default: <output>.report.json)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gc", parents=[common, demo, numeric], help="Granger-causal graph")
    p.add_argument("--variant", choices=("onestep", "multistep", "fullfuture", "singlelag"),
                   default="singlelag")
    p.add_argument("--analytic", action="store_true", help="population values from --model")
    p.add_argument("--p", type=int, help="model order for sample GC")
    p.add_argument("--h", help="horizons for multistep, e.g. 1..32 or 1,2,4")
    p.add_argument("--tau", help="lags for analytic singlelag (default 1..p)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", choices=("none", "bonferroni"), default="none")
    p.add_argument("--bonferroni", action="store_true", help="shorthand for --correction bonferroni")
    p.add_argument("--x", type=int, help="restrict to target variable (1-based)")
    p.add_argument("--y", type=int, help="restrict to source variable (1-based)")
    p.set_defaults(func=cmd_gc)

    p = sub.add_parser("reproduce", parents=[common, numeric],
                       help="write fig2.csv, fig3.csv and manifest.json for the demo model")
    p.add_argument("--rho-self", type=float, default=DemoModelSpec.rho_self)
    p.set_defaults(func=cmd_reproduce, seed=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GrangerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
