"""Command-line interface.

Four subcommands::

    sorted-effects spe     SPE/APE curve with confidence bands
    sorted-effects ca      classification analysis (moments or distributions)
    sorted-effects subpop  most/least-affected sets and outer confidence sets
    sorted-effects synth   synthetic benchmark datasets with known effects

Every analysis run writes its result CSVs, an SVG figure and a
``meta.json`` (configuration echo, seed, replicate failures, model
diagnostics, wall time) into ``--out-dir``.  Result files are
byte-identical across ``--ncores`` settings for a fixed seed; only the
wall time recorded in ``meta.json`` varies.

Exit status is 0 on success; on failure a single JSON object
``{"error": <category>, "message": ...}`` goes to stderr and the exit
status is 1.  Categories: data, formula, options, model, bootstrap,
internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .classify import ca_inference, group_distributions
from .confset import subpop_inference, summarize_affected, project_sets, SUMMARY_STATS
from .data import NA_STRINGS, Column, DataError, Dataset, FACTOR, NUMERIC
from .effects import EffectConfig
from .formula import DesignError, FormulaError
from .models import DEFAULT_TAUS, FitError, ModelSpec
from .resample import BootstrapError, BootstrapPlan
from .spe import DEFAULT_US, spe_inference
from .synth import DGPS, write_synth

PROG = "sorted-effects"


# ----------------------------------------------------------------------
# data ingestion
# ----------------------------------------------------------------------


def load_csv(path, factors=(), drop_na=False):
    """Read a CSV into a Dataset.

    Columns listed in `factors` are encoded with levels in
    first-appearance order; all other columns must parse as numbers.
    Missing cells ("", NA, NaN, ...) raise unless `drop_na` is set, in
    which case incomplete rows are dropped.

    Returns
    -------
    (Dataset, int)
        The dataset and the number of dropped rows.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None

    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"{path}: duplicate column names {dup}")
    for f in factors:
        if f not in header:
            raise DataError(f"{path}: declared factor {f!r} not in header")
    ncol = len(header)
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise DataError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {ncol}"
            )

    missing = [
        i for i, row in enumerate(rows)
        if any(cell.strip() in NA_STRINGS for cell in row)
    ]
    if missing and not drop_na:
        i = missing[0]
        j = next(
            k for k, cell in enumerate(rows[i]) if cell.strip() in NA_STRINGS
        )
        raise DataError(
            f"{path}: missing value at row {i + 2}, column {header[j]!r}"
            " (use --drop-na to drop incomplete rows)"
        )
    if missing:
        keep = sorted(set(range(len(rows))) - set(missing))
        rows = [rows[i] for i in keep]
    if not rows:
        raise DataError(f"{path}: no complete rows")

    cols: dict[str, Column] = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        if name in factors:
            levels: dict[str, int] = {}
            codes = np.empty(len(cells), dtype=np.int64)
            for i, cell in enumerate(cells):
                codes[i] = levels.setdefault(cell.strip(), len(levels))
            cols[name] = Column(FACTOR, codes, tuple(levels))
        else:
            vals = np.empty(len(cells))
            for i, cell in enumerate(cells):
                try:
                    vals[i] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: column {name!r}, row {i + 2}: {cell!r} is"
                        " not numeric (declare the column as a factor?)"
                    ) from None
            cols[name] = Column(NUMERIC, vals)
    return Dataset(cols, len(rows)), len(missing)


def load_schema(path) -> dict:
    """Read a schema JSON: ``{"factors": [...], "weight": "col" | null}``."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: schema must be a JSON object")
    factors = raw.get("factors", [])
    if not isinstance(factors, list):
        raise DataError(f"{path}: 'factors' must be a list of column names")
    weight = raw.get("weight")
    if weight is not None and not isinstance(weight, str):
        raise DataError(f"{path}: 'weight' must be a column name or null")
    return {"factors": [str(f) for f in factors], "weight": weight}


# ----------------------------------------------------------------------
# option parsing helpers
# ----------------------------------------------------------------------


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse a quantile grid: ``a:b/d`` (integer range over d) or a
    comma list of floats."""
    text = text.strip()
    if ":" in text:
        try:
            span, denom = text.split("/")
            a, b = span.split(":")
            a, b, d = int(a), int(b), int(denom)
        except ValueError:
            raise ValueError(
                f"cannot parse grid {text!r}; expected 'a:b/d' like '2:98/100'"
            ) from None
        if d <= 0 or b < a:
            raise ValueError(f"bad grid bounds in {text!r}")
        return tuple(np.arange(a, b + 1) / d)
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"cannot parse grid {text!r}") from None


def _comma_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    return "" if np.isnan(x) else f"{x:.6g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_meta(out_dir, command, args, extra):
    config = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func",)
    }
    meta = {
        "command": command,
        "version": __version__,
        "config": config,
        **extra,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(args):
    """Shared setup for the three analysis subcommands."""
    schema = load_schema(args.schema) if args.schema else {"factors": [], "weight": None}
    factors = list(dict.fromkeys(schema["factors"] + _comma_list(args.factors or "")))
    data, dropped = load_csv(args.data, factors=tuple(factors), drop_na=args.drop_na)
    if dropped:
        print(f"dropped {dropped} incomplete row(s)", file=sys.stderr)

    samp_weight = args.samp_weight or schema["weight"]
    taus = parse_grid(args.taus) if getattr(args, "taus", None) else ()
    if args.method == "qr" and not taus:
        taus = DEFAULT_TAUS
    spec = ModelSpec(args.method, taus if args.method == "qr" else ())
    compare = tuple(args.compare) if getattr(args, "compare", None) else None
    config = EffectConfig(args.var, args.var_type, compare)
    ncores = args.ncores if args.ncores else (os.cpu_count() or 1)
    plan = BootstrapPlan(
        boot_type=args.boot_type,
        b=args.b,
        seed=args.seed,
        threads=ncores if args.parallel else 1,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    return data, dropped, samp_weight, spec, config, plan


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def run_spe(args) -> int:
    t0 = time.perf_counter()
    data, dropped, samp_weight, spec, config, plan = _prepare(args)
    us = parse_grid(args.us) if args.us else DEFAULT_US
    result = spe_inference(
        data,
        args.fm,
        spec=spec,
        config=config,
        us=us,
        alpha=args.alpha,
        plan=plan,
        bc=not args.no_bc,
        samp_weight=samp_weight,
        subgroup=args.subgroup,
        drop_aliased=True,
    )
    _write_csv(
        os.path.join(args.out_dir, "spe.csv"),
        ["u", "estimate", "se", "lower_pointwise", "upper_pointwise",
         "lower_uniform", "upper_uniform"],
        zip(result.us, result.estimate, result.se, result.lower_pointwise,
            result.upper_pointwise, result.lower_uniform, result.upper_uniform),
    )
    _write_csv(
        os.path.join(args.out_dir, "ape.csv"),
        ["estimate", "se", "lower", "upper"],
        [[result.ape, result.ape_se, result.ape_lower, result.ape_upper]],
    )
    from . import plots

    plots.plot_spe(
        os.path.join(args.out_dir, "spe.svg"),
        result.us, result.estimate, result.lower_pointwise,
        result.upper_pointwise, result.lower_uniform, result.upper_uniform,
        ape=result.ape, var=args.var, alpha=args.alpha,
    )
    _write_meta(args.out_dir, "spe", args, {
        "n_rows": data.n_rows,
        "n_dropped": dropped,
        "diagnostics": result.diagnostics,
        "crit_uniform": result.crit_uniform,
        "crit_pointwise": result.crit_pointwise,
        "wall_time_s": time.perf_counter() - t0,
    })
    return 0


def run_ca(args) -> int:
    t0 = time.perf_counter()
    data, dropped, samp_weight, spec, config, plan = _prepare(args)
    t = _comma_list(args.t)
    common = dict(
        spec=spec, config=config, t=t, u=args.u, alpha=args.alpha, plan=plan,
        bc=not args.no_bc, samp_weight=samp_weight, subgroup=args.subgroup,
        drop_aliased=True,
    )
    if args.interest == "moment":
        cat = tuple(_comma_list(args.cat)) if args.cat else ()
        result = ca_inference(data, args.fm, cl=args.cl, cat=cat, **common)
        if args.cl == "both":
            _write_csv(
                os.path.join(args.out_dir, "ca_moments.csv"),
                ["variable", "most", "most_se", "least", "least_se"],
                zip(result.names, result.most, result.most_se,
                    result.least, result.least_se),
            )
        else:
            owners = _owner_map(data, t)
            p = [
                result.p_cat[j] if owners[j] in cat else result.p_pointwise[j]
                for j in range(len(result.names))
            ]
            _write_csv(
                os.path.join(args.out_dir, "ca_moments.csv"),
                ["variable", "estimate", "se", "joint_p", "p"],
                zip(result.names, result.diff, result.diff_se,
                    result.p_joint, p),
            )
        diagnostics = result.diagnostics
    else:
        range_cb = (
            None if args.range_cb in ("none", "all")
            else parse_grid(args.range_cb)
        )
        result = group_distributions(data, args.fm, range_cb=range_cb, **common)
        rows = []
        for var, c in result.curves.items():
            for i in range(c.points.size):
                rows.append([
                    var, c.points[i], c.most[i], c.most_lower[i],
                    c.most_upper[i], c.least[i], c.least_lower[i],
                    c.least_upper[i],
                ])
        _write_csv(
            os.path.join(args.out_dir, "ca_dist.csv"),
            ["variable", "point", "most", "most_lower", "most_upper",
             "least", "least_lower", "least_upper"],
            rows,
        )
        from . import plots

        for var, c in result.curves.items():
            plots.plot_ca_dist(
                os.path.join(args.out_dir, f"ca_dist_{var}.svg"),
                var, c.points, c.most, c.most_lower, c.most_upper,
                c.least, c.least_lower, c.least_upper, alpha=args.alpha,
            )
        diagnostics = result.diagnostics
    _write_meta(args.out_dir, "ca", args, {
        "n_rows": data.n_rows,
        "n_dropped": dropped,
        "diagnostics": diagnostics,
        "wall_time_s": time.perf_counter() - t0,
    })
    return 0


def _owner_map(data, t):
    """Owning variable of each reported column (factors expand)."""
    from .classify import report_matrix

    _, _, owner = report_matrix(data, t)
    return owner


def run_subpop(args) -> int:
    t0 = time.perf_counter()
    data, dropped, samp_weight, spec, config, plan = _prepare(args)
    result = subpop_inference(
        data, args.fm, spec=spec, config=config, u=args.u, alpha=args.alpha,
        plan=plan, samp_weight=samp_weight, subgroup=args.subgroup,
        drop_aliased=True,
    )
    for name, mask in (("most", result.most), ("least", result.least)):
        units = np.unique(result.unit[mask])
        rows = []
        for i in units:
            rows.append([
                data.column(c).labels()[i] if data.kind(c) == FACTOR
                else data.numeric(c)[i]
                for c in data.names
            ])
        _write_csv(
            os.path.join(args.out_dir, f"subpop_members_{name}.csv"),
            data.names, rows,
        )

    w = data.weights(samp_weight)[result.unit]
    vars_ = _comma_list(args.vars) if args.vars else None
    stats_rows = []
    stat_names: list[str] = []
    for group in ("most", "least"):
        table = summarize_affected(data, result, group, vars_, weights=w)
        stat_names = list(table)
        for stat in SUMMARY_STATS:
            stats_rows.append([group, stat] + [table[v][stat] for v in stat_names])
    _write_csv(
        os.path.join(args.out_dir, "subpop_stats.csv"),
        ["group", "stat"] + stat_names,
        stats_rows,
    )

    if args.varx and args.vary:
        proj = project_sets(data, result, args.varx, args.vary,
                            overlap=args.overlap)
        from . import plots

        plots.plot_subpop_projection(
            os.path.join(args.out_dir, "subpop_proj.svg"),
            args.varx, args.vary, proj["most"], proj["least"],
        )
    _write_meta(args.out_dir, "subpop", args, {
        "n_rows": data.n_rows,
        "n_dropped": dropped,
        "diagnostics": result.diagnostics,
        "crit_least": result.crit_least,
        "crit_most": result.crit_most,
        "wall_time_s": time.perf_counter() - t0,
    })
    return 0


def run_synth(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    out = args.out or os.path.join(args.out_dir, f"{args.dgp}.csv")
    write_synth(out, args.dgp, args.n, args.seed)
    return 0


# ----------------------------------------------------------------------
# argument parser
# ----------------------------------------------------------------------


def _add_common(p, with_bc=True):
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--schema", help="schema JSON: {factors: [...], weight: col}")
    p.add_argument("--factors", help="comma list of factor columns")
    p.add_argument("--drop-na", action="store_true",
                   help="drop incomplete rows instead of failing")
    p.add_argument("--fm", required=True, help='model formula, e.g. "y ~ a*b"')
    p.add_argument("--method", default="ols",
                   choices=["ols", "logit", "probit", "qr"])
    p.add_argument("--taus", help="quantile grid for qr: 'a:b/d' or comma list")
    p.add_argument("--var", required=True, help="variable of interest")
    p.add_argument("--var-type", default="binary",
                   choices=["binary", "continuous", "categorical"])
    p.add_argument("--compare", nargs=2, metavar=("FROM", "TO"),
                   help="levels for categorical effects")
    p.add_argument("--subgroup", help="population filter, e.g. 'age > 30 & t == 1'")
    p.add_argument("--samp-weight", help="sampling-weight column")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="1 - confidence level (default 0.1)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-b", type=int, default=500, help="bootstrap replicates")
    p.add_argument("--boot-type", default="nonpar",
                   choices=["nonpar", "weighted"])
    if with_bc:
        p.add_argument("--no-bc", action="store_true",
                       help="skip bootstrap bias correction")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--parallel", action="store_true",
                   help="evaluate replicates on a thread pool")
    p.add_argument("--ncores", type=int, default=0,
                   help="threads when --parallel (default: all cores;"
                        " SORTED_EFFECTS_THREADS overrides)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Sorted partial effects with bootstrap inference",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spe", help="sorted and average partial effects")
    _add_common(p)
    p.add_argument("--us", help="SPE quantile grid (default '1:9/10')")
    p.set_defaults(func=run_spe)

    p = sub.add_parser("ca", help="classification analysis")
    _add_common(p)
    p.add_argument("--interest", default="moment", choices=["moment", "dist"])
    p.add_argument("--t", required=True,
                   help="comma list of variables to report (or 0/1 vector)")
    p.add_argument("--cl", default="both", choices=["both", "diff"])
    p.add_argument("--cat", help="comma list of factors for within-factor p-values")
    p.add_argument("--u", type=float, default=0.1,
                   help="classification quantile index (default 0.1)")
    p.add_argument("--range-cb", default="1:99/100",
                   help="CDF evaluation grid for --interest dist"
                        " ('none' = distinct values)")
    p.set_defaults(func=run_ca)

    p = sub.add_parser("subpop", help="most/least affected subpopulations")
    _add_common(p, with_bc=False)
    p.add_argument("--u", type=float, default=0.1)
    p.add_argument("--vars", help="comma list of variables to summarise")
    p.add_argument("--varx", help="x variable for the projection plot")
    p.add_argument("--vary", help="y variable for the projection plot")
    p.add_argument("--overlap", action="store_true",
                   help="keep units that fall in both confidence sets")
    p.set_defaults(func=run_subpop)

    p = sub.add_parser("synth", help="synthetic benchmark data")
    p.add_argument("--dgp", required=True, choices=list(DGPS))
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="output CSV path (default <dgp>.csv)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=run_synth)
    return parser


_CATEGORIES: list[tuple[type, str]] = [
    (DataError, "data"),
    (FormulaError, "formula"),
    (DesignError, "formula"),
    (BootstrapError, "bootstrap"),
    (FitError, "model"),
    (ValueError, "options"),
    (OSError, "data"),
]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        category = next(
            (cat for cls, cat in _CATEGORIES if isinstance(exc, cls)),
            "internal",
        )
        json.dump({"error": category, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
