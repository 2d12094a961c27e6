"""Command-line interface around the fitting engine and its artifacts.

``jointgibbs fit`` writes a self-describing run directory (sample CSVs, a
meta file, the model-graph dump, a warnings log, and a manifest); the other
subcommands reload such a directory and emit their own artifact files.
Options come from an optional JSON config file; command-line flags override
config values.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .data import md_pattern, md_pattern_rows, read_csv
from .diagnostics import _fmt, SubsetSpec, gelman_rubin, mc_error, summarize
from .engine import compile_model, run_mcmc
from .engine.state import McmcSamples, McmcSettings, monitored_columns
from .errors import ConfigError, DataError, JointGibbsError
from .models import build_model_graph, describe_models
from .postprocess import (_num_str, dataset_table, emit_plot_data, get_mi_dat,
                          pred_df, predict)

_MODEL_KEYS = ("analysis_type", "models", "auxvars", "refcats", "no_model",
               "trunc", "shrinkage", "contrasts", "types", "hyperparameters",
               "monitor_params", "scale_vars")
_CONFIG_KEYS = set(_MODEL_KEYS) | {
    "formulas", "data", "na_token", "out",
    "n_iter", "n_adapt", "n_chains", "thin", "seed", "threads",
}


# ---------------------------------------------------------------------------
# Config plumbing


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("the config file must hold a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(
            f"unknown config key(s): {', '.join(sorted(unknown))}"
        )
    return cfg


def _fit_config(args) -> dict:
    """Config file merged with command-line flags; flags win."""
    cfg = _load_config(args.config) if args.config else {}
    for key in ("data", "na_token", "out", "n_iter", "n_adapt", "n_chains",
                "thin", "seed", "threads"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.formula:
        cfg["formulas"] = list(args.formula)
    if args.monitor_imps:
        monitor = dict(cfg.get("monitor_params") or {})
        monitor["imps"] = True
        cfg["monitor_params"] = monitor
    for key in ("data", "formulas", "out"):
        if not cfg.get(key):
            raise ConfigError(f"'{key}' is required (config file or flag)")
    if "n_iter" not in cfg:
        raise ConfigError("'n_iter' is required (config file or flag)")
    cfg["data"] = os.path.abspath(cfg["data"])
    cfg["out"] = os.path.abspath(cfg["out"])
    return cfg


def _config_hash(obj) -> str:
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _build_graph(cfg: dict, ds):
    kwargs = {k: cfg[k] for k in _MODEL_KEYS if k in cfg}
    return build_model_graph(cfg["formulas"], ds, **kwargs)


def _write_json(path: str, payload, one_line: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if one_line:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
        else:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir: str, command: str, options: dict,
                    fit_manifest: dict | None = None) -> None:
    payload = {
        "version": __version__,
        "command": command,
        "options": options,
        "config_hash": _config_hash(options),
    }
    if fit_manifest is not None:
        payload["fit_config_hash"] = fit_manifest["config_hash"]
        payload["seed"] = fit_manifest.get("seed")
    _write_json(os.path.join(out_dir, "manifest.json"), payload)


# ---------------------------------------------------------------------------
# The run directory


def _write_chain_csv(path: str, names, labels, matrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration"] + list(names))
        for i, label in enumerate(labels):
            writer.writerow([str(int(label))]
                            + [_num_str(v) for v in matrix[i]])


def cmd_fit(args) -> int:
    cfg = _fit_config(args)
    ds = read_csv(cfg["data"], na_token=cfg.get("na_token", "NA"))
    graph = _build_graph(cfg, ds)
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)

    with open(os.path.join(out, "model_graph.txt"), "w", encoding="utf-8") as fh:
        fh.write(describe_models(graph) + "\n")

    n_iter = int(cfg["n_iter"])
    n_chains = int(cfg.get("n_chains", 3))
    settings = {
        "n_iter": n_iter,
        "n_adapt": int(cfg.get("n_adapt", 100)),
        "n_chains": n_chains,
        "thin": int(cfg.get("thin", 1)),
        "seed": cfg.get("seed"),
    }
    if n_iter == 0:
        model = compile_model(graph)
        keep = monitored_columns(model)
        names = tuple(model.node_names[i] for i in keep)
        labels = np.empty(0, dtype=int)
        chains = [np.empty((0, len(names)))] * n_chains
        warnings = list(graph.warnings)
    else:
        samples = run_mcmc(graph, n_iter, n_adapt=settings["n_adapt"],
                           n_chains=n_chains, thin=settings["thin"],
                           seed=settings["seed"],
                           n_threads=cfg.get("threads"))
        names = samples.node_names
        labels = samples.iterations
        chains = samples.chains
        warnings = list(samples.warnings)

    for k, matrix in enumerate(chains, start=1):
        _write_chain_csv(os.path.join(out, f"samples_chain{k}.csv"),
                         names, labels, matrix)
    _write_json(os.path.join(out, "meta.json"), {
        "nodes": list(names),
        "iterations": [int(v) for v in labels],
        "n_obs": graph.ds.n_rows,
        "settings": settings,
    })
    with open(os.path.join(out, "warnings.log"), "w", encoding="utf-8") as fh:
        for msg in warnings:
            fh.write(msg + "\n")
    manifest = {
        "version": __version__,
        "command": "fit",
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "data_sha256": _file_sha256(cfg["data"]),
        "seed": cfg.get("seed"),
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"run written to {out}")
    return 0


def _load_run(run_dir: str):
    """Rebuild an :class:`McmcSamples` from a fit's run directory."""
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"{run_dir!r} is not a run directory "
                          "(no manifest.json)")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("command") != "fit":
        raise ConfigError(f"{run_dir!r} was not written by 'fit'")
    cfg = manifest["config"]
    if not os.path.exists(cfg["data"]):
        raise DataError(f"the fitted data file {cfg['data']!r} no longer exists")
    if _file_sha256(cfg["data"]) != manifest["data_sha256"]:
        raise DataError(
            f"the data file {cfg['data']!r} changed since the fit; "
            "refusing to reload the run"
        )
    ds = read_csv(cfg["data"], na_token=cfg.get("na_token", "NA"))
    graph = _build_graph(cfg, ds)
    model = compile_model(graph)

    with open(os.path.join(run_dir, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    names = tuple(meta["nodes"])
    settings = McmcSettings(**meta["settings"])
    chains = []
    for k in range(1, settings.n_chains + 1):
        path = os.path.join(run_dir, f"samples_chain{k}.csv")
        if not os.path.exists(path):
            raise ConfigError(f"run directory is missing {path!r}")
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["iteration"] + list(names):
            raise ConfigError(f"unexpected column header in {path!r}")
        body = rows[1:]
        matrix = np.empty((len(body), len(names)))
        for i, row in enumerate(body):
            matrix[i] = [math.nan if c == "NA" else float(c) for c in row[1:]]
        chains.append(matrix)
    labels = np.array(meta["iterations"], dtype=int)

    warnings: list = []
    log_path = os.path.join(run_dir, "warnings.log")
    if os.path.exists(log_path):
        with open(log_path, "r", encoding="utf-8") as fh:
            warnings = [line.rstrip("\n") for line in fh if line.strip()]
    samples = McmcSamples(node_names=names, chains=chains, iterations=labels,
                          settings=settings, graph=graph, model=model,
                          warnings=warnings)
    return samples, manifest


# ---------------------------------------------------------------------------
# Shared option parsing


def _subset_from(args) -> SubsetSpec | None:
    params = None
    if args.subset:
        try:
            params = json.loads(args.subset)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--subset is not valid JSON: {e}") from None
        if not isinstance(params, dict):
            raise ConfigError("--subset must be a JSON object of node selections")
    exclude: tuple = ()
    if args.exclude_chains:
        try:
            exclude = tuple(int(t) for t in args.exclude_chains.split(",") if t)
        except ValueError:
            raise ConfigError(
                "--exclude-chains must be a comma-separated list of chain ids"
            ) from None
    if (args.start is None and args.end is None and args.thin is None
            and not exclude and params is None):
        return None
    return SubsetSpec(start=args.start, end=args.end, thin=args.thin,
                      exclude_chains=exclude, params=params)


def _subset_options(args) -> dict:
    return {"start": args.start, "end": args.end, "thin": args.thin,
            "exclude_chains": args.exclude_chains, "subset": args.subset}


def _parse_quantiles(text: str):
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError("--quantiles must be two numbers like '0.025,0.975'") \
            from None
    if len(parts) != 2:
        raise ConfigError("--quantiles must be two numbers like '0.025,0.975'")
    return tuple(parts)


def _parse_overrides(pairs) -> dict:
    out: dict = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(
                f"--override needs the form VAR=VALUE[,VALUE...], got {pair!r}"
            )
        name, _, values = pair.partition("=")
        parsed = []
        for token in values.split(","):
            try:
                parsed.append(float(token))
            except ValueError:
                parsed.append(token)
        out[name.strip()] = parsed
    return out


def _out_dir(args, run_dir: str, default_name: str) -> str:
    out = args.out if args.out else os.path.join(run_dir, default_name)
    os.makedirs(out, exist_ok=True)
    return out


def _print_table(rows) -> None:
    widths = [max(len(str(r[j])) for r in rows) for j in range(len(rows[0]))]
    for row in rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(row, widths)))


# ---------------------------------------------------------------------------
# Subcommands over a run directory


def cmd_summary(args) -> int:
    samples, manifest = _load_run(args.run_dir)
    spec = _subset_from(args)
    quantiles = _parse_quantiles(args.quantiles) if args.quantiles \
        else (0.025, 0.975)
    summary = summarize(samples, spec, quantiles=quantiles,
                        missinfo=args.missinfo)
    text = summary.text()
    print(text)
    out = _out_dir(args, args.run_dir, "summary")
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(summary.to_json() + "\n")
    options = {**_subset_options(args), "quantiles": list(quantiles),
               "missinfo": args.missinfo}
    _write_manifest(out, "summary", options, manifest)
    return 0


def cmd_diagnose(args) -> int:
    samples, manifest = _load_run(args.run_dir)
    spec = _subset_from(args)
    out = _out_dir(args, args.run_dir, "diagnose")
    payload: dict = {"notes": []}

    try:
        gr = gelman_rubin(samples, spec, autoburnin=args.autoburnin)
        payload["gelman_rubin"] = {
            node: {"point": point, "upper": upper}
            for node, (point, upper) in gr.items()
        }
    except ConfigError as e:
        payload["gelman_rubin"] = None
        payload["notes"].append(str(e))
    try:
        table, warnings = mc_error(samples, spec)
        payload["mc_error"] = {
            node: {"estimate": est, "mcse": mcse, "sd": sd, "ratio": ratio}
            for node, (est, mcse, sd, ratio) in table.items()
        }
        payload["notes"].extend(warnings)
    except ConfigError as e:
        payload["mc_error"] = None
        payload["notes"].append(str(e))

    kinds = [k for k in (args.plots or "").split(",") if k]
    if kinds:
        payload["plots"] = {}
        for kind in kinds:
            paths = emit_plot_data(samples, kind, out_dir=out, subset=spec,
                                   svg=args.svg)
            payload["plots"][kind] = paths
    _write_json(os.path.join(out, "diagnose.json"), payload)

    rows = [["", "GR-point", "GR-upper", "MCE/SD"]]
    names = (samples.node_names if payload.get("gelman_rubin") is None
             else list(payload["gelman_rubin"]))
    for node in names:
        gr_row = (payload.get("gelman_rubin") or {}).get(node)
        mc_row = (payload.get("mc_error") or {}).get(node)
        rows.append([
            node,
            _fmt(gr_row["point"]) if gr_row else "NA",
            _fmt(gr_row["upper"]) if gr_row else "NA",
            _fmt(mc_row["ratio"]) if mc_row else "NA",
        ])
    _print_table(rows)
    for note in payload["notes"]:
        print(f"note: {note}")

    options = {**_subset_options(args), "autoburnin": args.autoburnin,
               "plots": kinds, "svg": args.svg}
    _write_manifest(out, "diagnose", options, manifest)
    return 0


def cmd_predict(args) -> int:
    samples, manifest = _load_run(args.run_dir)
    if args.newdata and args.vars:
        raise ConfigError("give either --newdata or --vars, not both")
    quantiles = _parse_quantiles(args.quantiles) if args.quantiles \
        else (0.025, 0.975)
    overrides = _parse_overrides(args.override)
    if args.newdata:
        newdata = read_csv(args.newdata)
    elif args.vars:
        newdata = pred_df(samples.graph, args.vars,
                          grid_length=args.grid_length, overrides=overrides)
    else:
        newdata = None
    result = predict(samples, newdata=newdata, type=args.type,
                     quantiles=quantiles, subset=_subset_from(args))

    out = _out_dir(args, args.run_dir, "predict")
    header, rows = result.table()
    csv_path = os.path.join(out, "prediction.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    _write_json(os.path.join(out, "prediction.json"), {
        "kind": result.kind,
        "columns": header,
        "n_rows": len(rows),
        "quantiles": list(quantiles),
        "categories": list(result.categories),
    }, one_line=True)

    options = {**_subset_options(args), "type": args.type,
               "quantiles": list(quantiles), "newdata": args.newdata,
               "vars": args.vars, "grid_length": args.grid_length,
               "override": args.override or []}
    _write_manifest(out, "predict", options, manifest)
    print(f"{len(rows)} prediction(s) written to {csv_path}")
    return 0


def cmd_impute_export(args) -> int:
    samples, manifest = _load_run(args.run_dir)
    stack = get_mi_dat(samples, m=args.m, include=not args.no_original,
                       start=args.start, minspace=args.minspace,
                       seed=args.seed)
    out = _out_dir(args, args.run_dir, "impute")
    header, rows = dataset_table(stack.data)
    csv_path = os.path.join(out, "imputations.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    _write_json(os.path.join(out, "imputations.json"), {
        "columns": header,
        "n_rows": len(rows),
        "m": args.m,
        "include_original": not args.no_original,
        "minspace": args.minspace,
        "seed": args.seed,
        "picks": [list(p) for p in stack.picks],
    }, one_line=True)
    options = {"m": args.m, "seed": args.seed, "start": args.start,
               "minspace": args.minspace,
               "include_original": not args.no_original}
    _write_manifest(out, "impute-export", options, manifest)
    print(f"{len(rows)} row(s) written to {csv_path}")
    return 0


def cmd_md_pattern(args) -> int:
    ds = read_csv(args.data, na_token=args.na_token or "NA")
    pattern = md_pattern(ds)
    rows = md_pattern_rows(pattern)
    _print_table(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "md_pattern.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerows(rows)
        _write_json(os.path.join(args.out, "md_pattern.json"), {
            "columns": rows[0],
            "n_rows": len(rows) - 1,
            "variables": list(pattern.variables),
        }, one_line=True)
        _write_manifest(args.out, "md-pattern", {
            "data": os.path.abspath(args.data),
            "na_token": args.na_token or "NA",
        })
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_subset_flags(sub) -> None:
    sub.add_argument("--start", type=int, default=None,
                     help="first iteration label to keep")
    sub.add_argument("--end", type=int, default=None,
                     help="last iteration label to keep")
    sub.add_argument("--thin", type=int, default=None,
                     help="keep every thin-th retained draw")
    sub.add_argument("--exclude-chains", default=None, metavar="IDS",
                     help="comma-separated 1-based chain ids to drop")
    sub.add_argument("--subset", default=None, metavar="JSON",
                     help="node selection as a JSON object, "
                          "e.g. '{\"analysis_main\": true}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointgibbs",
        description="Joint Bayesian regression with incomplete covariates.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="fit a model and write a run directory")
    fit.add_argument("--config", default=None, help="JSON config file")
    fit.add_argument("--data", default=None, help="input CSV file")
    fit.add_argument("--na-token", dest="na_token", default=None,
                     help="missing-value token in the CSV (default NA)")
    fit.add_argument("--formula", action="append", default=None,
                     help="model formula; repeat for covariate-model formulas")
    fit.add_argument("--out", default=None, help="run directory to create")
    fit.add_argument("--n-iter", dest="n_iter", type=int, default=None,
                     help="sampling iterations per chain (0 dumps the graph only)")
    fit.add_argument("--n-adapt", dest="n_adapt", type=int, default=None,
                     help="adaptation sweeps per chain")
    fit.add_argument("--n-chains", dest="n_chains", type=int, default=None)
    fit.add_argument("--thin", type=int, default=None,
                     help="storage thinning interval")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--threads", type=int, default=None,
                     help="parallel chains (JOINTGIBBS_THREADS also caps this)")
    fit.add_argument("--monitor-imps", dest="monitor_imps",
                     action="store_true",
                     help="store imputed values for later export")
    fit.set_defaults(func=cmd_fit)

    summary = commands.add_parser("summary",
                                  help="posterior summary of a run directory")
    summary.add_argument("run_dir")
    summary.add_argument("--quantiles", default=None, metavar="LO,HI")
    summary.add_argument("--missinfo", action="store_true",
                         help="append per-variable missing-value counts")
    summary.add_argument("--out", default=None,
                         help="artifact directory (default RUN_DIR/summary)")
    _add_subset_flags(summary)
    summary.set_defaults(func=cmd_summary)

    diagnose = commands.add_parser("diagnose",
                                   help="convergence checks and plot data")
    diagnose.add_argument("run_dir")
    diagnose.add_argument("--autoburnin", action="store_true",
                          help="drop the first half before the scale-reduction "
                               "factor")
    diagnose.add_argument("--plots", default=None, metavar="KINDS",
                          help="comma-separated plot-data kinds "
                               "(trace,density,mcse_ratio,imp_distr)")
    diagnose.add_argument("--svg", action="store_true",
                          help="also render SVG plots (needs matplotlib)")
    diagnose.add_argument("--out", default=None,
                          help="artifact directory (default RUN_DIR/diagnose)")
    _add_subset_flags(diagnose)
    diagnose.set_defaults(func=cmd_diagnose)

    pred = commands.add_parser("predict", help="posterior predictions")
    pred.add_argument("run_dir")
    pred.add_argument("--newdata", default=None, help="CSV of covariate rows")
    pred.add_argument("--vars", default=None,
                      help="one-sided grid formula, e.g. '~ age'")
    pred.add_argument("--grid-length", dest="grid_length", type=int,
                      default=100, help="grid points per variable")
    pred.add_argument("--override", action="append", default=None,
                      metavar="VAR=V1[,V2...]",
                      help="pin a non-grid variable; repeatable")
    pred.add_argument("--type", default="link",
                      help="link|lp|response|prob|class")
    pred.add_argument("--quantiles", default=None, metavar="LO,HI")
    pred.add_argument("--out", default=None,
                      help="artifact directory (default RUN_DIR/predict)")
    _add_subset_flags(pred)
    pred.set_defaults(func=cmd_predict)

    impute = commands.add_parser("impute-export",
                                 help="export multiply-imputed datasets")
    impute.add_argument("run_dir")
    impute.add_argument("--m", type=int, default=10,
                        help="number of completed copies")
    impute.add_argument("--seed", type=int, default=None)
    impute.add_argument("--start", type=int, default=None,
                        help="first eligible iteration label")
    impute.add_argument("--minspace", type=int, default=50,
                        help="minimum label distance between picks")
    impute.add_argument("--no-original", dest="no_original",
                        action="store_true",
                        help="do not prepend the original data as copy 0")
    impute.add_argument("--out", default=None,
                        help="artifact directory (default RUN_DIR/impute)")
    impute.set_defaults(func=cmd_impute_export)

    pattern = commands.add_parser("md-pattern",
                                  help="tabulate missing-data patterns")
    pattern.add_argument("--data", required=True, help="input CSV file")
    pattern.add_argument("--na-token", dest="na_token", default=None)
    pattern.add_argument("--out", default=None,
                         help="also write md_pattern.csv to this directory")
    pattern.set_defaults(func=cmd_md_pattern)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except JointGibbsError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
