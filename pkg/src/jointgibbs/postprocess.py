"""Predictions, prediction grids, multiply-imputed exports, and plot data.

Everything operates read-only on stored samples and the fitted model graph;
predictions use the data-scale coefficient draws directly, so no scaling
state is needed here.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .data import LEVEL_ONE, Column, Dataset, _fmt_num
from .diagnostics import SubsetSpec, mc_error, subset_samples
from .engine.families import clm_category_probs, linkinv, mlogit_log_probs
from .errors import ConfigError, DataError
from .formulas import Variable, expand_terms, parse_formula, term_dependencies
from .models import ModelGraph


_PREDICT_TYPES = ("link", "lp", "response", "prob", "class")


@dataclass
class PredictionResult:
    """Per-row posterior prediction with interval bounds.

    ``fit``/``lo``/``hi`` are (n,) arrays, or (n, K) for category
    probabilities; class predictions carry labels in ``fit`` and no bounds.
    """

    newdata: Dataset
    kind: str
    fit: np.ndarray
    lo: np.ndarray | None
    hi: np.ndarray | None
    categories: tuple = ()

    def table(self):
        """(header, rows) of strings covering newdata plus the fit block."""
        header = list(self.newdata.names)
        cells = [_dataset_row(self.newdata, i) for i in range(self.newdata.n_rows)]
        if self.kind == "class":
            header.append("class")
            for i, row in enumerate(cells):
                row.append(str(self.fit[i]))
        elif self.kind == "prob":
            for cat in self.categories:
                header.extend([f"fit_{cat}", f"lo_{cat}", f"hi_{cat}"])
            for i, row in enumerate(cells):
                for k in range(len(self.categories)):
                    row.extend([_num_str(self.fit[i, k]), _num_str(self.lo[i, k]),
                                _num_str(self.hi[i, k])])
        else:
            header.extend(["fit", "lo", "hi"])
            for i, row in enumerate(cells):
                row.extend([_num_str(self.fit[i]), _num_str(self.lo[i]),
                            _num_str(self.hi[i])])
        return header, cells


def _num_str(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NA"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _dataset_row(ds: Dataset, i: int):
    out = []
    for name in ds.names:
        col = ds[name]
        if col.missing[i]:
            out.append("NA")
        elif col.kind == "categorical":
            out.append(str(col.categories[int(col.values[i]) - 1]))
        else:
            out.append(_num_str(col.values[i]))
    return out


def dataset_table(ds: Dataset):
    """(header, rows) of strings for CSV emission, category labels restored."""
    return list(ds.names), [_dataset_row(ds, i) for i in range(ds.n_rows)]


# ---------------------------------------------------------------------------
# Prediction


def _analysis_submodel(graph: ModelGraph):
    return next(sm for sm in graph.submodels if sm.role == "analysis")


def _needed_variables(design) -> list:
    seen: dict = {}
    for block in design.blocks:
        for dep in sorted(block.deps):
            seen[dep] = True
    return list(seen)


def _codes_for(graph: ModelGraph, var: str, col: Column) -> np.ndarray:
    """Map a newdata column onto the category coding the model was fit with."""
    cats = graph.metas[var].categories
    index = {c: k + 1 for k, c in enumerate(cats)}
    out = np.zeros(col.values.size)
    for i in range(col.values.size):
        if col.missing[i]:
            continue
        label = (col.categories[int(col.values[i]) - 1]
                 if col.kind == "categorical" else _fmt_num(col.values[i]))
        code = index.get(label)
        if code is None:
            raise DataError(
                f"{var!r} has value {label!r} not seen when the model was fit"
            )
        out[i] = code
    return out


def _newdata_values(graph: ModelGraph, design, newdata: Dataset) -> dict:
    needed = _needed_variables(design)
    newdata.require(needed)
    values: dict = {}
    for var in needed:
        col = newdata[var]
        if col.n_missing_cells:
            raise DataError(
                f"newdata has {col.n_missing_cells} missing value(s) in {var!r}; "
                "predictions need complete covariates"
            )
        if graph.metas[var].is_categorical:
            values[var] = _codes_for(graph, var, col)
        elif col.kind == "categorical":
            raise DataError(f"{var!r} must be numeric in newdata")
        else:
            values[var] = col.values.astype(float)
    return values


def _window_only(subset: SubsetSpec | None) -> SubsetSpec | None:
    if subset is None:
        return None
    return SubsetSpec(start=subset.start, end=subset.end, thin=subset.thin,
                      exclude_chains=subset.exclude_chains)


def _draws_by_name(view, names) -> np.ndarray:
    cols = []
    matrix = view.pooled_matrix()
    for name in names:
        try:
            cols.append(view.node_names.index(name))
        except ValueError:
            raise ConfigError(
                f"prediction needs node {name!r}, which was not monitored"
            ) from None
    return matrix[:, cols]


def predict(samples, newdata: Dataset | None = None, type: str = "link",
            quantiles=(0.025, 0.975), subset: SubsetSpec | None = None,
            graph: ModelGraph | None = None) -> PredictionResult:
    """Posterior predictions of the analysis model for new covariate rows.

    ``type`` selects the scale: "link"/"lp" for the linear predictor,
    "response" for its inverse-link transform, and "prob"/"class" for the
    category probabilities (or the most probable category) of ordinal and
    multinomial models. Mixed models predict with all random effects at
    zero. Rows with missing covariates are rejected.
    """
    graph = graph if graph is not None else samples.graph
    if type not in _PREDICT_TYPES:
        raise ConfigError(
            f"unknown prediction type {type!r}; choose from {', '.join(_PREDICT_TYPES)}"
        )
    kind = "link" if type == "lp" else type
    lo_q, hi_q = quantiles
    if not 0 <= lo_q <= hi_q <= 1:
        raise ConfigError("quantiles must satisfy 0 <= lo <= hi <= 1")

    sm = _analysis_submodel(graph)
    categorical_response = sm.model_type in ("clm", "mlogit")
    if kind in ("prob", "class") and not categorical_response:
        raise ConfigError(
            f"prediction type {type!r} needs an ordinal or multinomial "
            f"analysis model, not {sm.model_type}"
        )
    if kind == "response" and categorical_response:
        raise ConfigError(
            f"{sm.model_type} predictions use type 'prob' or 'class'"
        )

    if newdata is None:
        newdata = graph.ds
    design = samples.model.designs[sm.response]
    values = _newdata_values(graph, design, newdata)
    X = design.data_scale_matrix(values, newdata.n_rows)

    view = subset_samples(samples, _window_only(subset))
    resp = sm.response

    if sm.model_type == "mlogit":
        if kind not in ("prob", "class"):
            raise ConfigError(
                "a multinomial model has one linear predictor per "
                "non-reference category; use type 'prob' or 'class'"
            )
        cats = graph.metas[resp].categories
        per_cat = []
        for cat in cats[1:]:
            names = [f"{resp}.{cat}.(Intercept)"]
            names += [f"{resp}.{cat}.{col}" for col in design.names]
            per_cat.append(_draws_by_name(view, names))
        n_draws = per_cat[0].shape[0]
        probs = np.empty((n_draws, newdata.n_rows, len(cats)))
        for d in range(n_draws):
            etas = np.column_stack(
                [b[d, 0] + X @ b[d, 1:] for b in per_cat]
            )
            probs[d] = np.exp(mlogit_log_probs(etas))
        return _categorical_result(newdata, kind, probs, cats, lo_q, hi_q)

    beta = _draws_by_name(view, [f"{resp}.{col}" for col in design.names])
    per_draw = X @ beta.T  # (n, n_draws)

    if sm.model_type == "clm" and kind in ("prob", "class"):
        cats = graph.metas[resp].categories
        kk = len(cats)
        gammas = _draws_by_name(
            view, [f"gamma_{resp}[{k}]" for k in range(1, kk)]
        )
        n_draws = gammas.shape[0]
        probs = np.empty((n_draws, newdata.n_rows, kk))
        for d in range(n_draws):
            probs[d] = clm_category_probs(per_draw[:, d], gammas[d])
        return _categorical_result(newdata, kind, probs, cats, lo_q, hi_q)

    if kind == "response":
        with np.errstate(all="ignore"):
            per_draw = linkinv(sm.link, per_draw)
    fit = per_draw.mean(axis=1)
    lo = np.quantile(per_draw, lo_q, axis=1)
    hi = np.quantile(per_draw, hi_q, axis=1)
    return PredictionResult(newdata=newdata, kind=kind, fit=fit, lo=lo, hi=hi)


def _categorical_result(newdata, kind, probs, cats, lo_q, hi_q):
    mean = probs.mean(axis=0)  # (n, K)
    if kind == "class":
        labels = np.array([cats[k] for k in np.argmax(mean, axis=1)], dtype=object)
        return PredictionResult(newdata=newdata, kind="class", fit=labels,
                                lo=None, hi=None, categories=tuple(cats))
    lo = np.quantile(probs, lo_q, axis=0)
    hi = np.quantile(probs, hi_q, axis=0)
    return PredictionResult(newdata=newdata, kind="prob", fit=mean,
                            lo=lo, hi=hi, categories=tuple(cats))


# ---------------------------------------------------------------------------
# Prediction grids


def _grid_variables(vars) -> list:
    if isinstance(vars, str):
        ast = parse_formula(vars, one_sided_ok=True)
        if ast.response is not None:
            raise ConfigError("the grid formula must be one-sided, like '~ age'")
        if ast.fixed is None:
            raise ConfigError("the grid formula names no variables")
        names: list = []
        for term in expand_terms(ast.fixed):
            for factor in term.factors:
                if not isinstance(factor, Variable):
                    raise ConfigError(
                        "grid variables must be plain column names"
                    )
                if factor.name not in names:
                    names.append(factor.name)
        return names
    names = list(vars)
    if not all(isinstance(n, str) for n in names):
        raise ConfigError("grid variables must be column names")
    return names


def pred_df(graph: ModelGraph, vars, data: Dataset | None = None,
            grid_length: int = 100, overrides: dict | None = None) -> Dataset:
    """Covariate grid for prediction curves.

    The named variables vary over an even grid spanning their observed
    range (categorical ones over all their categories); ``overrides`` pin
    other variables to explicit value sets; everything else the analysis
    model needs is held at the median (continuous) or the reference
    category. All combinations are crossed.
    """
    if grid_length < 1:
        raise ConfigError("grid_length must be at least 1")
    data = data if data is not None else graph.ds
    overrides = dict(overrides or {})
    grid_vars = _grid_variables(vars)
    if not grid_vars:
        raise ConfigError("no grid variables given")
    clash = set(grid_vars) & set(overrides)
    if clash:
        raise ConfigError(
            f"variable(s) {', '.join(sorted(clash))} appear both in the grid "
            "and in overrides"
        )

    sm = _analysis_submodel(graph)
    design_deps: list = []
    for term in sm.predictor_terms:
        for dep in sorted(term_dependencies(term)):
            if dep in graph.metas and dep not in design_deps:
                design_deps.append(dep)
    columns_order: list = []
    for name in itertools.chain(grid_vars, overrides, design_deps):
        if name not in columns_order:
            columns_order.append(name)

    value_sets: dict = {}
    for name in columns_order:
        col = data[name]
        meta = graph.metas.get(name)
        is_cat = meta.is_categorical if meta is not None else col.kind == "categorical"
        if name in grid_vars:
            if is_cat:
                cats = meta.categories if meta is not None else col.categories
                value_sets[name] = [float(k + 1) for k in range(len(cats))]
            else:
                obs = col.observed()
                if obs.size == 0:
                    raise DataError(
                        f"grid variable {name!r} has no observed values"
                    )
                lo, hi = float(obs.min()), float(obs.max())
                if lo == hi or grid_length == 1:
                    value_sets[name] = [lo]
                else:
                    value_sets[name] = list(np.linspace(lo, hi, grid_length))
        elif name in overrides:
            vals = overrides[name]
            if np.isscalar(vals) or isinstance(vals, str):
                vals = [vals]
            if is_cat:
                value_sets[name] = [_override_code(graph, name, col, v) for v in vals]
            else:
                value_sets[name] = [float(v) for v in vals]
        else:
            if is_cat:
                ref = graph.refcats.get(name, 0)
                value_sets[name] = [float(ref + 1)]
            else:
                obs = col.observed()
                if obs.size == 0:
                    raise DataError(
                        f"covariate {name!r} has no observed values to hold fixed"
                    )
                value_sets[name] = [float(np.median(obs))]

    combos = list(itertools.product(*(value_sets[n] for n in columns_order)))
    n = len(combos)
    out: dict = {}
    for j, name in enumerate(columns_order):
        vals = np.array([c[j] for c in combos])
        meta = graph.metas.get(name)
        col = data[name]
        if (meta is not None and meta.is_categorical) or \
                (meta is None and col.kind == "categorical"):
            cats = meta.categories if meta is not None else col.categories
            out[name] = Column(name, "categorical", vals,
                               np.zeros(n, dtype=bool), tuple(cats))
        else:
            out[name] = Column(name, "continuous", vals, np.zeros(n, dtype=bool))
    return Dataset(columns=out, n_rows=n)


def _override_code(graph: ModelGraph, name: str, col: Column, value) -> float:
    meta = graph.metas.get(name)
    cats = meta.categories if meta is not None else col.categories
    label = value if isinstance(value, str) else _fmt_num(float(value))
    if label not in cats:
        raise DataError(f"{name!r} has no category {label!r}")
    return float(cats.index(label) + 1)


# ---------------------------------------------------------------------------
# Multiply-imputed data export


@dataclass
class ImputedStack:
    """Original data plus completed copies, stacked into one long table.

    ``picks`` records the (chain, iteration) each copy was filled from,
    1-based chains, in copy order.
    """

    data: Dataset
    picks: list


def get_mi_dat(samples, data: Dataset | None = None, m: int = 10,
               include: bool = True, start: int | None = None,
               minspace: int = 50, seed: int | None = None) -> ImputedStack:
    """Stack of completed datasets drawn from the stored imputations.

    Each of the ``m`` copies fills every modelled missing cell with the
    stored value from one randomly chosen (chain, iteration); picks are
    restricted to iterations at or after ``start`` and pairwise at least
    ``minspace`` iterations apart. ``include`` prepends the original data
    as copy 0. Columns ``Imputation_``, ``.id`` and ``.rownr`` identify the
    copy and the original row.
    """
    if m < 0:
        raise ConfigError("m cannot be negative")
    data = data if data is not None else samples.graph.ds
    graph = samples.graph
    if data.n_rows != graph.ds.n_rows:
        raise DataError(
            f"data has {data.n_rows} rows but the model was fit on "
            f"{graph.ds.n_rows}"
        )

    model = samples.model
    stored = {name: j for j, name in enumerate(samples.node_names)}
    cell_index: list = []  # (var, node column, rows-to-fill)
    for info in model.missing:
        for u, node in zip(info.units, info.node_names):
            j = stored.get(node)
            if j is None:
                raise ConfigError(
                    "imputed values were not monitored; refit with "
                    "monitor_params={'imps': True}"
                )
            rows = graph.gi.rows_of(u) if info.level2 else np.array([u])
            cell_index.append((info.var, j, rows))

    labels = samples.iterations
    first = int(labels[0]) if labels.size else 0
    lo = first if start is None else int(start)
    rng = np.random.default_rng(seed)
    picks: list = []  # (chain 0-based, label, stored row index)
    chosen_labels: list = []
    for _ in range(m):
        ok = labels >= lo
        for lab in chosen_labels:
            ok &= np.abs(labels - lab) >= minspace
        candidates = np.where(ok)[0]
        if candidates.size == 0:
            raise ConfigError(
                f"cannot choose {m} iterations at least {minspace} apart "
                f"from {labels.size} stored iterations (start={lo})"
            )
        chain = int(rng.integers(samples.n_chains))
        idx = int(rng.choice(candidates))
        picks.append((chain, int(labels[idx]), idx))
        chosen_labels.append(int(labels[idx]))

    n = data.n_rows
    blocks = ([0] if include else []) + list(range(1, m + 1))
    n_out = len(blocks) * n

    out: dict = {}
    out["Imputation_"] = Column(
        "Imputation_", "continuous",
        np.repeat(np.array(blocks, dtype=float), n),
        np.zeros(n_out, dtype=bool),
    )
    rownr = np.tile(np.arange(1.0, n + 1.0), len(blocks))
    out[".id"] = Column(".id", "continuous", rownr.copy(), np.zeros(n_out, dtype=bool))
    out[".rownr"] = Column(".rownr", "continuous", rownr.copy(),
                           np.zeros(n_out, dtype=bool))

    for name in data.names:
        col = data[name]
        values = np.tile(col.values, len(blocks))
        missing = np.tile(col.missing, len(blocks))
        for b, block in enumerate(blocks):
            if block == 0:
                continue
            chain, _, idx = picks[block - 1]
            offset = b * n
            for var, j, rows in cell_index:
                if var != name:
                    continue
                values[offset + rows] = samples.chains[chain][idx, j]
                missing[offset + rows] = False
        out[name] = Column(name, col.kind, values, missing, col.categories)
    stack = Dataset(columns=out, n_rows=n_out)
    return ImputedStack(data=stack, picks=[(c + 1, lab) for c, lab, _ in picks])


# ---------------------------------------------------------------------------
# Plot-data emission


_PLOT_KINDS = ("trace", "density", "mcse_ratio", "imp_distr")


def emit_plot_data(samples, kind: str, out_dir: str = ".",
                   subset: SubsetSpec | None = None, svg: bool = False) -> dict:
    """Write plot-ready CSV data (plus a one-line JSON header sidecar).

    Kinds: "trace" (chain, iteration, node, value), "density" (per-node,
    per-chain Gaussian kernel density), "mcse_ratio" (per-node Monte-Carlo
    error ratios against the 0.05 reference), "imp_distr" (observed versus
    imputed value distributions per variable). Returns the written paths.
    """
    if kind not in _PLOT_KINDS:
        raise ConfigError(
            f"unknown plot kind {kind!r}; choose from {', '.join(_PLOT_KINDS)}"
        )
    os.makedirs(out_dir, exist_ok=True)

    if kind == "imp_distr":
        header, rows, meta = _imp_distr_data(samples, subset)
    else:
        view = subset_samples(samples, subset)
        if kind == "trace":
            header = ["chain", "iteration", "node", "value"]
            rows = []
            for c, chain_id in enumerate(view.chain_ids):
                mat = view.chains[c]
                for i, it in enumerate(view.iterations):
                    for j, node in enumerate(view.node_names):
                        rows.append([str(chain_id), str(int(it)), node,
                                     _num_str(mat[i, j])])
            meta = {}
        elif kind == "density":
            header = ["node", "chain", "x", "density"]
            rows = []
            for j, node in enumerate(view.node_names):
                for c, chain_id in enumerate(view.chain_ids):
                    xs, ys = _gaussian_density(view.chains[c][:, j])
                    rows.extend(
                        [node, str(chain_id), _num_str(x), _num_str(y)]
                        for x, y in zip(xs, ys)
                    )
            meta = {"kernel": "gaussian", "bandwidth": "silverman", "points": 512}
        else:  # mcse_ratio
            table, _ = mc_error(view)
            header = ["node", "estimate", "mcse", "sd", "ratio"]
            rows = [[node, _num_str(est), _num_str(mcse), _num_str(sd),
                     _num_str(ratio)]
                    for node, (est, mcse, sd, ratio) in table.items()]
            meta = {"reference": 0.05}

    base = os.path.join(out_dir, kind)
    csv_path = base + ".csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    sidecar = dict(meta)
    sidecar.update({"kind": kind, "columns": header, "n_rows": len(rows)})
    json_path = base + ".json"
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(sidecar, sort_keys=True) + "\n")
    paths = {"csv": csv_path, "header": json_path}
    if svg:
        paths["svg"] = _render_svg(kind, header, rows, base + ".svg")
    return paths


def _gaussian_density(draws: np.ndarray, points: int = 512):
    x = np.asarray(draws, dtype=float)
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    sigma = min(sd, iqr / 1.34) if iqr > 0 else sd
    if sigma <= 0:
        sigma = sd if sd > 0 else max(abs(float(x[0])), 1.0)
    bw = 0.9 * sigma * n ** (-0.2)
    grid = np.linspace(x.min() - 3 * bw, x.max() + 3 * bw, points)
    z = (grid[None, :] - x[:, None]) / bw
    dens = np.exp(-0.5 * z * z).sum(axis=0) / (n * bw * math.sqrt(2 * math.pi))
    return grid, dens


def _imp_distr_data(samples, subset: SubsetSpec | None):
    graph = samples.graph
    view = subset_samples(samples, _window_only(subset))
    stored = {name: j for j, name in enumerate(view.node_names)}
    by_var: dict = {}
    for info in samples.model.missing:
        cols = [stored[nm] for nm in info.node_names if nm in stored]
        if cols:
            by_var[info.var] = cols

    header = ["variable", "series", "value"]
    rows = []
    pooled = view.pooled_matrix()
    for name, meta in graph.metas.items():
        if name == graph.grouping:
            continue
        col = graph.ds[name]
        is_cat = meta.is_categorical

        def render(v):
            return (str(meta.categories[int(v) - 1]) if is_cat else _num_str(v))

        if meta.level != LEVEL_ONE and graph.gi is not None:
            obs_values = [
                col.values[r]
                for r in graph.gi.rep_rows
                if not col.missing[r]
            ]
        else:
            obs_values = list(col.values[~col.missing])
        rows.extend([name, "observed", render(v)] for v in obs_values)
        for j in by_var.get(name, ()):
            rows.extend([name, "imputed", render(v)] for v in pooled[:, j])
    return header, rows, {"series": ["observed", "imputed"]}


def _render_svg(kind: str, header, rows, path: str) -> str:
    try:
        import matplotlib
    except ImportError:
        raise ConfigError(
            "SVG rendering needs matplotlib; install the 'plot' extra"
        ) from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 5))
    if kind == "trace":
        nodes = sorted({r[2] for r in rows})[:6]
        for node in nodes:
            for chain in sorted({r[0] for r in rows}):
                pts = [(int(r[1]), float(r[3])) for r in rows
                       if r[2] == node and r[0] == chain]
                if pts:
                    ax.plot([p[0] for p in pts], [p[1] for p in pts],
                            lw=0.6, alpha=0.8)
        ax.set_xlabel("iteration")
    elif kind == "density":
        nodes = sorted({r[0] for r in rows})[:6]
        for node in nodes:
            for chain in sorted({r[1] for r in rows}):
                pts = [(float(r[2]), float(r[3])) for r in rows
                       if r[0] == node and r[1] == chain]
                if pts:
                    ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=0.8)
        ax.set_ylabel("density")
    elif kind == "mcse_ratio":
        names = [r[0] for r in rows]
        ratios = [float(r[4]) if r[4] != "NA" else 0.0 for r in rows]
        ax.barh(range(len(names)), ratios)
        ax.set_yticks(range(len(names)), names, fontsize=6)
        ax.axvline(0.05, color="red", lw=1)
        ax.set_xlabel("mcse / sd")
    else:  # imp_distr
        variables = sorted({r[0] for r in rows})[:4]
        for var in variables:
            obs = [float(r[2]) for r in rows
                   if r[0] == var and r[1] == "observed" and r[2] != "NA"
                   and _is_number(r[2])]
            imp = [float(r[2]) for r in rows
                   if r[0] == var and r[1] == "imputed" and _is_number(r[2])]
            if obs:
                ax.hist(obs, bins=30, density=True, histtype="step")
            if imp:
                ax.hist(imp, bins=30, density=True, histtype="step", ls="--")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
