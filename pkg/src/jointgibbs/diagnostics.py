"""Posterior summaries and convergence checks over stored samples.

Everything here operates read-only on an :class:`McmcSamples` result, after
an optional subset step that restricts iterations, chains, and nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import LEVEL_ONE
from .errors import ConfigError
from .models import resolve_monitors


@dataclass
class SubsetSpec:
    """Restriction applied before computing summaries.

    ``start``/``end`` refer to iteration labels (the numbers reported next
    to the stored draws), ``thin`` keeps every thin-th retained draw,
    ``exclude_chains`` removes 1-based chain ids, and ``params`` selects
    nodes with the same keyword algebra used for monitoring (plus an
    ``other`` entry of explicit node names).
    """

    start: int | None = None
    end: int | None = None
    thin: int | None = None
    exclude_chains: tuple = ()
    params: dict | None = None


@dataclass
class Subset:
    """Materialized view: retained chains x iterations x nodes."""

    node_names: tuple
    chains: list  # (n_kept, n_nodes) arrays
    iterations: np.ndarray
    chain_ids: tuple  # original 1-based ids of the retained chains
    thin_total: int  # storage thinning x subset thinning

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_kept(self) -> int:
        return int(self.iterations.size)

    def node(self, name: str) -> np.ndarray:
        j = self.node_names.index(name)
        return np.stack([c[:, j] for c in self.chains])

    def pooled_matrix(self) -> np.ndarray:
        return np.concatenate(self.chains, axis=0)


def subset_samples(samples, spec: SubsetSpec | None = None) -> Subset:
    """Apply a :class:`SubsetSpec` to stored samples."""
    spec = spec or SubsetSpec()

    labels = samples.iterations
    keep = np.ones(labels.size, dtype=bool)
    if spec.start is not None:
        keep &= labels >= spec.start
    if spec.end is not None:
        keep &= labels <= spec.end
    idx = np.where(keep)[0]
    if spec.thin is not None:
        if spec.thin < 1:
            raise ConfigError("subset thin must be at least 1")
        idx = idx[:: spec.thin]
    if idx.size == 0:
        raise ConfigError("the requested subset contains no iterations")

    n_chains = samples.n_chains
    excluded = {int(c) for c in spec.exclude_chains}
    bad = excluded - set(range(1, n_chains + 1))
    if bad:
        raise ConfigError(
            f"cannot exclude chain(s) {sorted(bad)}; "
            f"available chains are 1..{n_chains}"
        )
    chain_ids = tuple(k for k in range(1, n_chains + 1) if k not in excluded)
    if not chain_ids:
        raise ConfigError("all chains were excluded")

    cols = _select_nodes(samples, spec.params)
    chains = [samples.chains[k - 1][np.ix_(idx, cols)] for k in chain_ids]
    names = tuple(samples.node_names[j] for j in cols)
    thin_total = samples.settings.thin * (spec.thin or 1)
    return Subset(node_names=names, chains=chains, iterations=labels[idx],
                  chain_ids=chain_ids, thin_total=thin_total)


def _select_nodes(samples, params: dict | None) -> np.ndarray:
    if params is None:
        return np.arange(len(samples.node_names))
    flags, other = resolve_monitors(params)
    group_of = dict(zip(samples.model.node_names, samples.model.node_groups))
    stored = set(samples.node_names)
    for name in other:
        if name not in stored:
            raise ConfigError(f"node {name!r} was not monitored")
    explicit = set(other)
    cols = [j for j, name in enumerate(samples.node_names)
            if name in explicit or flags.get(group_of[name], False)]
    if not cols:
        raise ConfigError("the requested subset selects no nodes")
    return np.array(cols, dtype=int)


# ---------------------------------------------------------------------------
# Elementary statistics


def tail_probability(draws) -> float:
    """Posterior probability mass on the smaller side of zero, doubled.

    Zeros belong to neither side, so a sample sitting exactly on zero
    lowers both fractions.
    """
    arr = np.asarray(draws, dtype=float)
    if arr.size == 0:
        raise ConfigError("tail probability needs at least one draw")
    above = float(np.mean(arr > 0))
    below = float(np.mean(arr < 0))
    return 2.0 * min(above, below)


def gr_moments(matrix: np.ndarray):
    """Within-chain variance, between-chain variance, and the pooled
    posterior-variance estimate from an (m, n) chain matrix."""
    n = matrix.shape[1]
    means = matrix.mean(axis=1)
    s2 = matrix.var(axis=1, ddof=1)
    w = float(np.mean(s2))
    b = n * float(np.var(means, ddof=1))
    vhat = (n - 1) / n * w + b / n
    return means, s2, w, b, vhat


def _gr_single(matrix: np.ndarray):
    """Potential scale reduction of one node from an (m, n) chain matrix.

    Returns (point, upper) with the degrees-of-freedom correction; both are
    NaN when the within-chain variance is zero.
    """
    m, n = matrix.shape
    if m < 2:
        raise ConfigError("the scale-reduction factor needs at least two chains")
    if n < 2:
        raise ConfigError("the scale-reduction factor needs at least two draws per chain")
    means, s2, w, b, vhat = gr_moments(matrix)
    if w == 0.0:
        return (math.nan, math.nan)

    # degrees-of-freedom correction based on the sampling variance of vhat
    mu = float(np.mean(means))
    var_w = float(np.var(s2, ddof=1)) / m
    var_b = 2.0 * b * b / (m - 1)
    cov_s2_mean = float(np.cov(s2, means, ddof=1)[0, 1]) if m > 1 else 0.0
    cov_s2_mean2 = float(np.cov(s2, means**2, ddof=1)[0, 1]) if m > 1 else 0.0
    cov_wb = (n / m) * (cov_s2_mean2 - 2.0 * mu * cov_s2_mean)
    var_v = (((n - 1) / n) ** 2 * var_w + (1.0 / n) ** 2 * var_b
             + 2.0 * (n - 1) / (n * n) * cov_wb)
    if var_v <= 0.0 or not np.isfinite(var_v):
        correction = 1.0
    else:
        df = 2.0 * vhat * vhat / var_v
        correction = (df + 3.0) / (df + 1.0)

    point = math.sqrt(correction * vhat / w)
    if var_w <= 0.0:
        # within-chain variances are identical; the F quantile degenerates
        # to a scaled chi-square quantile
        fq = stats.chi2.ppf(0.975, m - 1) / (m - 1)
    else:
        w_df = 2.0 * w * w / var_w
        fq = stats.f.ppf(0.975, m - 1, w_df)
    ratio_up = (n - 1) / n + fq * b / (n * w)
    upper = math.sqrt(correction * ratio_up)
    return point, upper


def gelman_rubin(samples, subset: SubsetSpec | None = None,
                 autoburnin: bool = False) -> dict:
    """Per-node potential scale reduction (point estimate, 97.5% upper bound).

    ``autoburnin`` drops the first half of the retained iterations before
    computing the criterion.
    """
    view = samples if isinstance(samples, Subset) else subset_samples(samples, subset)
    if view.n_chains < 2:
        raise ConfigError("the scale-reduction factor needs at least two chains")
    out = {}
    for name in view.node_names:
        mat = view.node(name)
        if autoburnin:
            mat = mat[:, mat.shape[1] // 2:]
        out[name] = _gr_single(mat)
    return out


def mc_error(samples, subset: SubsetSpec | None = None):
    """Monte-Carlo standard error per node via non-overlapping batch means.

    Returns (table, warnings); the table maps node -> (estimate, mcse, sd,
    mcse/sd ratio). The ratio is NaN for a constant node.
    """
    view = samples if isinstance(samples, Subset) else subset_samples(samples, subset)
    pooled = view.pooled_matrix()
    n_total = pooled.shape[0]
    warnings: list = []
    if n_total < 100:
        warnings.append(
            f"Monte-Carlo errors are based on only {n_total} draws; "
            "estimates may be unstable"
        )
    batch = int(math.floor(math.sqrt(n_total)))
    n_batches = n_total // batch if batch else 0
    if n_batches < 2:
        raise ConfigError("too few draws for batch-means Monte-Carlo errors")
    used = pooled[: n_batches * batch, :]
    means = used.reshape(n_batches, batch, -1).mean(axis=1)

    out = {}
    for j, name in enumerate(view.node_names):
        col = pooled[:, j]
        est = float(np.mean(col))
        sd = float(np.std(col, ddof=1))
        mcse = float(np.std(means[:, j], ddof=1) / math.sqrt(n_batches))
        ratio = mcse / sd if sd > 0 else math.nan
        out[name] = (est, mcse, sd, ratio)
    return out, warnings


# ---------------------------------------------------------------------------
# Full summary


@dataclass
class PosteriorSummary:
    """Posterior table plus the run's bookkeeping block."""

    rows: dict  # node -> statistics dict
    order: tuple  # node display order
    meta: dict
    missinfo: dict | None = None
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {"nodes": {k: self.rows[k] for k in self.order}, "meta": self.meta}
        if self.missinfo is not None:
            payload["missinfo"] = self.missinfo
        if self.warnings:
            payload["warnings"] = list(self.warnings)
        return json.dumps(payload, indent=2, allow_nan=True)

    def text(self) -> str:
        lo_pct = 100 * self.meta["quantiles"][0]
        hi_pct = 100 * self.meta["quantiles"][1]
        headers = ["", "Mean", "SD", f"{lo_pct:g}%", f"{hi_pct:g}%",
                   "tail-prob", "GR-crit", "MCE/SD"]
        table = [headers]
        for name in self.order:
            r = self.rows[name]
            table.append([
                name,
                _fmt(r["mean"]), _fmt(r["sd"]), _fmt(r["lo"]), _fmt(r["hi"]),
                _fmt(r["tail_prob"]), _fmt(r["gr_upper"]),
                _fmt(r["mcse_sd_ratio"]),
            ])
        widths = [max(len(row[c]) for row in table) for c in range(len(headers))]
        lines = []
        for row in table:
            cells = [row[0].ljust(widths[0])]
            cells += [row[c].rjust(widths[c]) for c in range(1, len(headers))]
            lines.append(" ".join(cells).rstrip())

        meta = self.meta
        lines.append("")
        lines.append("MCMC settings:")
        lines.append(f"Iterations = {meta['first_iteration']}:{meta['last_iteration']}")
        lines.append(f"Sample size per chain = {meta['sample_size_per_chain']}")
        lines.append(f"Thinning interval = {meta['thin']}")
        lines.append(f"Number of chains = {meta['n_chains']}")
        lines.append("")
        lines.append(f"Number of observations: {meta['n_obs']}")
        if "grouping" in meta:
            lines.append(
                f"Number of groups ({meta['grouping']}): {meta['n_groups']}"
            )
        if self.missinfo is not None:
            lines.append("")
            lines.append("Missing values:")
            for level, entries in self.missinfo.items():
                title = "rows" if level == LEVEL_ONE else f"groups ({level})"
                lines.append(f"  per {title}:")
                for e in entries:
                    lines.append(
                        f"    {e['variable']}: {e['n_missing']} missing "
                        f"({e['percent']:.1f}%)"
                    )
        if self.warnings:
            lines.append("")
            for w in self.warnings:
                lines.append(f"Note: {w}")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NaN"
    ax = abs(x)
    if ax != 0 and (ax >= 1e5 or ax < 1e-4):
        return f"{x:.3e}"
    return f"{x:.3f}"


def summarize(samples, subset: SubsetSpec | None = None, *,
              quantiles=(0.025, 0.975), missinfo: bool = False) -> PosteriorSummary:
    """Posterior mean/sd/quantiles plus tail probabilities, scale-reduction
    factors, and Monte-Carlo errors for every retained node."""
    lo_q, hi_q = quantiles
    if not 0 <= lo_q < hi_q <= 1:
        raise ConfigError("quantiles must satisfy 0 <= lo < hi <= 1")
    view = subset_samples(samples, subset)
    if view.n_kept < 2:
        raise ConfigError("summaries need at least two retained iterations")

    gr = (gelman_rubin(view) if view.n_chains >= 2
          else {name: (math.nan, math.nan) for name in view.node_names})
    try:
        mce, mce_warnings = mc_error(view)
    except ConfigError:
        mce = {name: (math.nan, math.nan, math.nan, math.nan)
               for name in view.node_names}
        mce_warnings = ["too few draws for batch-means Monte-Carlo errors"]

    rows = {}
    matrix = view.pooled_matrix()
    for j, name in enumerate(view.node_names):
        pooled = matrix[:, j]
        point, upper = gr[name]
        _, mcse, sd_b, ratio = mce[name]
        rows[name] = {
            "mean": float(np.mean(pooled)),
            "sd": float(np.std(pooled, ddof=1)),
            "lo": float(np.quantile(pooled, lo_q)),
            "hi": float(np.quantile(pooled, hi_q)),
            "tail_prob": tail_probability(pooled),
            "gr_point": point,
            "gr_upper": upper,
            "mcse": mcse,
            "mcse_sd_ratio": ratio,
        }

    graph = samples.graph
    meta = {
        "first_iteration": int(view.iterations[0]),
        "last_iteration": int(view.iterations[-1]),
        "sample_size_per_chain": view.n_kept,
        "thin": view.thin_total,
        "n_chains": view.n_chains,
        "n_obs": graph.ds.n_rows,
        "quantiles": [lo_q, hi_q],
    }
    if graph.grouping:
        meta["grouping"] = graph.grouping
        meta["n_groups"] = graph.gi.n_groups

    mi = _missinfo_tables(graph) if missinfo else None
    return PosteriorSummary(rows=rows, order=view.node_names, meta=meta,
                            missinfo=mi, warnings=list(mce_warnings))


def _missinfo_tables(graph) -> dict:
    tables: dict = {}
    for name, meta in graph.metas.items():
        if name == graph.grouping:
            continue
        entry = {
            "variable": name,
            "n_missing": int(meta.n_missing),
            "percent": 100.0 * meta.n_missing / meta.n_units if meta.n_units else 0.0,
        }
        tables.setdefault(meta.level, []).append(entry)
    for entries in tables.values():
        entries.sort(key=lambda e: (-e["n_missing"], e["variable"]))
    return tables
