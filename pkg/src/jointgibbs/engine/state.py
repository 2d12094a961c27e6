"""Chain state, node registry, and initialization for the Gibbs engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import LEVEL_ONE
from ..design import (
    RandomDesign,
    SubModelDesign,
    backtransform_coefs,
    evaluate_numeric,
    raw_values,
    threshold_shift,
)
from ..errors import ConfigError, DataError
from ..models import GAUSSIAN_IDENTITY_TYPES, ModelGraph, SubModel


@dataclass
class McmcSettings:
    n_iter: int
    n_adapt: int = 100
    n_chains: int = 3
    thin: int = 1
    seed: int | None = None
    inits: object = None  # dict applied to all chains, or list of per-chain dicts

    def __post_init__(self):
        if self.n_iter < 0 or self.n_adapt < 0:
            raise ConfigError("n_iter and n_adapt cannot be negative")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be at least 1")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")

    @property
    def n_stored(self) -> int:
        return self.n_iter // self.thin

    def iteration_labels(self) -> np.ndarray:
        return self.n_adapt + self.thin * np.arange(1, self.n_stored + 1)


# ---------------------------------------------------------------------------
# Missing-data bookkeeping


@dataclass
class MissingInfo:
    var: str
    level2: bool
    units: np.ndarray  # data-row indices, or group indices for group-level vars
    node_names: tuple
    lower: float = -np.inf  # support/truncation bounds for continuous vars
    upper: float = np.inf
    transform: str = "identity"  # proposal scale: identity | log | logit


@dataclass
class AffectedMap:
    """Design-matrix rows of one submodel touched by one variable's missing
    units, with the owning unit of every row."""

    positions: np.ndarray
    cell_of: np.ndarray


# ---------------------------------------------------------------------------
# Compiled model


class CompiledModel:
    """Everything shared and immutable across chains: designs, node layout,
    missing-data maps, response arrays."""

    def __init__(self, graph: ModelGraph):
        self.graph = graph
        self.designs: dict = {}
        self.zdesigns: dict = {}
        for sm in graph.submodels:
            self.designs[sm.response] = SubModelDesign(graph, sm)
            if sm.mixed:
                self.zdesigns[sm.response] = RandomDesign(graph, sm)

        self.raw = raw_values(graph)
        # group-level variables are stored row-expanded: every row of a group
        # carries the group's value
        if graph.grouping:
            for name, meta in graph.metas.items():
                if meta.level != LEVEL_ONE and name != graph.grouping:
                    vals = self.raw[name]
                    for g in range(graph.gi.n_groups):
                        rows = graph.gi.rows_of(g)
                        obs = vals[rows][np.isfinite(vals[rows])]
                        vals[rows] = obs[0] if obs.size else np.nan

        self.survival = None
        analysis = graph.analysis
        if analysis.survival is not None:
            rows = np.arange(graph.ds.n_rows)
            time = evaluate_numeric(analysis.survival.time, self.raw, rows)
            event = _event_indicator(analysis.survival.event, self.raw, graph, rows)
            if np.any(~np.isfinite(time)) or np.any(time <= 0):
                raise DataError("survival times must be positive and observed")
            self.survival = (time, event)

        self.missing = self._missing_info()
        self.affected = self._affected_maps()
        self.collectors, self.node_names, self.node_groups = build_node_registry(self)
        self.imp_index = {
            info.var: i for i, info in enumerate(self.missing)
        }

    # -- missing-data layout

    def _missing_info(self) -> list:
        graph = self.graph
        infos: list = []
        # the analysis response is imputed by its own likelihood draw
        order = [sm.response for sm in graph.submodels]
        for resp in order:
            sm = graph.submodel_for(resp)
            if sm.survival is not None:
                continue
            if resp not in graph.metas:
                continue
            meta = graph.metas[resp]
            col = graph.ds[resp]
            level2 = graph.grouping is not None and meta.level != LEVEL_ONE
            if level2:
                units = np.array(
                    [g for g in range(graph.gi.n_groups)
                     if not np.isfinite(self.raw[resp][graph.gi.rep_rows[g]])],
                    dtype=int,
                )
                labels = [graph.gi.labels[g] for g in units]
                names = tuple(f"{resp}[g:{lab}]" for lab in labels)
            else:
                units = np.where(col.missing)[0]
                names = tuple(f"{resp}[{r + 1}]" for r in units)
            if units.size == 0:
                continue
            lower, upper = -np.inf, np.inf
            transform = "identity"
            if not meta.is_categorical:
                if sm.family in ("lognorm", "gamma"):
                    transform, lower = "log", 0.0
                elif sm.family == "beta":
                    transform, lower, upper = "logit", 0.0, 1.0
                if sm.trunc is not None:
                    lo, hi = sm.trunc
                    lower = lo if lo is not None else lower
                    upper = hi if hi is not None else upper
                    transform = "identity"
            infos.append(MissingInfo(resp, level2, units, names, lower, upper, transform))
        return infos

    def _affected_maps(self) -> dict:
        """(variable, submodel response) -> AffectedMap for every submodel
        whose design involves the variable."""
        graph = self.graph
        out: dict = {}
        for info in self.missing:
            for sm in graph.submodels:
                design = self.designs[sm.response]
                deps = set()
                for block in design.blocks:
                    deps |= block.deps
                if info.var not in deps:
                    continue
                if info.level2:
                    if len(design.rows) == graph.ds.n_rows:
                        positions = []
                        cells = []
                        for i, g in enumerate(info.units):
                            rows = graph.gi.rows_of(g)
                            positions.append(rows)
                            cells.append(np.full(len(rows), i))
                        pos = np.concatenate(positions)
                        cell = np.concatenate(cells)
                    else:
                        pos = info.units.copy()
                        cell = np.arange(info.units.size)
                else:
                    pos = info.units.copy()
                    cell = np.arange(info.units.size)
                out[(info.var, sm.response)] = AffectedMap(pos, cell)
        return out

    def own_positions(self, info: MissingInfo) -> AffectedMap:
        """Positions of a variable's missing units inside its own model."""
        design = self.designs[info.var]
        if info.level2 and len(design.rows) != self.graph.ds.n_rows:
            return AffectedMap(info.units.copy(), np.arange(info.units.size))
        if info.level2:
            positions = []
            cells = []
            for i, g in enumerate(info.units):
                rows = self.graph.gi.rows_of(g)
                positions.append(rows)
                cells.append(np.full(len(rows), i))
            return AffectedMap(np.concatenate(positions), np.concatenate(cells))
        return AffectedMap(info.units.copy(), np.arange(info.units.size))

    def response_values(self, sm: SubModel, values: dict):
        if sm.survival is not None:
            return self.survival
        return values[sm.response]


def compile_model(graph: ModelGraph) -> CompiledModel:
    """Freeze designs, node layout, and missing-data maps for sampling."""
    return CompiledModel(graph)


def _event_indicator(event, raw, graph, rows) -> np.ndarray:
    from ..formulas import Comparison, Variable

    if isinstance(event, Variable):
        meta = graph.metas.get(event.name)
        if meta is not None and meta.is_categorical:
            # a 0/1 column read as two categories: map codes back to labels
            try:
                labels = np.array([float(c) for c in meta.categories])
            except ValueError:
                raise DataError(
                    f"event indicator {event.name!r} has non-numeric categories; "
                    "write an explicit comparison such as status == \"died\""
                ) from None
            codes = raw[event.name][rows]
            if np.any(~np.isfinite(codes)):
                raise DataError("survival event indicator cannot be missing")
            vals = labels[codes.astype(int) - 1]
            if not set(np.unique(vals)) <= {0.0, 1.0}:
                raise DataError("survival event indicator must be 0/1")
            return vals
    if isinstance(event, Comparison):
        name = event.var.name
        meta = graph.metas.get(name)
        if meta is not None and meta.is_categorical:
            if isinstance(event.value, str):
                if event.value not in meta.categories:
                    raise DataError(
                        f"event category {event.value!r} not found in {name!r}"
                    )
                code = meta.categories.index(event.value) + 1
            else:
                code = int(event.value)
            hit = raw[name][rows] == code
        else:
            hit = raw[name][rows] == float(event.value)
        ind = hit.astype(float)
        return ind if event.op == "==" else 1.0 - ind
    vals = evaluate_numeric(event, raw, rows)
    uniq = set(np.unique(vals[np.isfinite(vals)]))
    if not uniq <= {0.0, 1.0}:
        raise DataError("survival event indicator must be 0/1")
    return vals


# ---------------------------------------------------------------------------
# Node registry: names, monitor groups, data-scale extraction


def build_node_registry(model: CompiledModel):
    """Collectors turning a chain state into one stored row per iteration.

    Returns (collectors, names, groups): collectors are (slice, fn) pairs
    where fn(state) yields the data-scale values for that slice; groups maps
    every node to its monitor keyword for selection.
    """
    graph = model.graph
    collectors: list = []
    names: list = []
    groups: list = []

    def add(block_names, group, fn):
        sl = slice(len(names), len(names) + len(block_names))
        names.extend(block_names)
        groups.extend([group] * len(block_names))
        collectors.append((sl, fn))

    for sm in graph.submodels:
        resp = sm.response
        design = model.designs[resp]
        main = sm.role == "analysis"
        coef_group = "betas" if main else "alphas"

        if sm.model_type == "mlogit":
            meta = graph.metas[resp]
            cats = [c for k, c in enumerate(meta.categories) if k != 0]
            block = []
            for cat in cats:
                block.append(f"{resp}.{cat}.(Intercept)")
                block.extend(f"{resp}.{cat}.{col}" for col in design.names)

            def fn(state, resp=resp, design=design):
                beta = state.params[resp]["beta"]
                out = np.empty(beta.shape[0] * (beta.shape[1]))
                k = 0
                for row in beta:
                    slopes = backtransform_coefs(design, row[1:])
                    out[k] = row[0] - threshold_shift(design, row[1:])
                    out[k + 1:k + beta.shape[1]] = slopes
                    k += beta.shape[1]
                return out

            add(block, coef_group, fn)
        else:
            def fn(state, resp=resp, design=design):
                return backtransform_coefs(design, state.params[resp]["beta"])

            add([f"{resp}.{col}" for col in design.names], coef_group, fn)

        if sm.model_type == "clm":
            meta = graph.metas[resp]
            kk = meta.n_categories

            def fn_g(state, resp=resp, design=design):
                p = state.params[resp]
                return p["gamma"] + threshold_shift(design, p["beta"])

            add([f"gamma_{resp}[{k}]" for k in range(1, kk)],
                "gamma_main" if main else "gamma_other", fn_g)
            if kk > 2:
                def fn_d(state, resp=resp):
                    return state.params[resp]["delta"]

                add([f"delta_{resp}[{k}]" for k in range(1, kk - 1)],
                    "gamma_main" if main else "delta_other", fn_d)

        if sm.has_tau:
            if sm.family == "beta":
                def fn_t(state, resp=resp):
                    return np.array([state.params[resp]["tau"]])

                add([f"tau_{resp}"], "tau_main" if main else "tau_other", fn_t)
            else:
                def fn_s(state, resp=resp, design=design):
                    return np.array(
                        [design.sd_y / np.sqrt(state.params[resp]["tau"])]
                    )

                add([f"sigma_{resp}"], "sigma_main" if main else "sigma_other", fn_s)

        if sm.model_type == "survreg":
            def fn_sh(state, resp=resp):
                return np.array([state.params[resp]["shape"]])

            add([f"shape_{resp}"], "shape_main", fn_sh)

        if sm.mixed:
            z = model.zdesigns[resp]
            q = z.n_effects
            sd2 = design.sd_y ** 2
            pairs = [(i, j) for i in range(q) for j in range(i, q)]

            def fn_D(state, resp=resp, pairs=pairs, sd2=sd2):
                D = np.linalg.inv(state.params[resp]["invD"]) * sd2
                return np.array([D[i, j] for i, j in pairs])

            add([f"D_{resp}[{i + 1},{j + 1}]" for i, j in pairs],
                "D_main" if main else "D_other", fn_D)

            def fn_iD(state, resp=resp, pairs=pairs, sd2=sd2):
                iD = state.params[resp]["invD"] / sd2
                return np.array([iD[i, j] for i, j in pairs])

            add([f"invD_{resp}[{i + 1},{j + 1}]" for i, j in pairs],
                "invD_main" if main else "invD_other", fn_iD)

            if q > 1:
                def fn_R(state, resp=resp):
                    return state.params[resp]["RinvD"]

                add([f"RinvD_{resp}[{j + 1}]" for j in range(q)],
                    "RinvD_main" if main else "RinvD_other", fn_R)

            labels = graph.gi.labels
            sd_y = design.sd_y

            def fn_b(state, resp=resp, sd_y=sd_y):
                return (state.params[resp]["b"] * sd_y).ravel()

            add([f"b_{resp}[{lab},{j + 1}]" for lab in labels for j in range(q)],
                "ranef_main" if main else "ranef_other", fn_b)

    for info in model.missing:
        if info.level2:
            rows = model.graph.gi.rep_rows[info.units]
        else:
            rows = info.units

        def fn_imp(state, var=info.var, rows=rows):
            return state.values[var][rows]

        add(list(info.node_names), "imps", fn_imp)

    return collectors, tuple(names), tuple(groups)


def monitored_columns(model: CompiledModel) -> np.ndarray:
    """Indices of stored nodes selected by the graph's monitor settings."""
    graph = model.graph
    flags = graph.monitor_flags
    keep = []
    known = set(model.node_names)
    for name in graph.monitor_other:
        if name not in known:
            raise ConfigError(f"monitored node {name!r} does not exist in the model")
    explicit = set(graph.monitor_other)
    for i, (name, group) in enumerate(zip(model.node_names, model.node_groups)):
        if name in explicit or flags.get(group, False):
            keep.append(i)
    return np.array(keep, dtype=int)


# ---------------------------------------------------------------------------
# Chain state


@dataclass
class AdaptiveScalar:
    log_step: float
    history: list = field(default_factory=list)  # acceptance indicators

    @property
    def step(self) -> float:
        return float(np.exp(self.log_step))


@dataclass
class AdaptiveVector:
    log_steps: np.ndarray
    history: list = field(default_factory=list)  # arrays of indicators

    @property
    def steps(self) -> np.ndarray:
        return np.exp(self.log_steps)


@dataclass
class ChainState:
    values: dict
    params: dict
    X: dict
    eta: dict
    eta_ranef: dict
    rng: np.random.Generator
    adapt: dict
    sweep: int = 0
    warnings: list = field(default_factory=list)


INITIAL_STEP = 0.2


def init_chain(model: CompiledModel, rng: np.random.Generator,
               user_inits: dict | None = None) -> ChainState:
    graph = model.graph
    values = {k: v.copy() for k, v in model.raw.items()}

    # fill missing cells: observed mean plus small noise, clipped to support;
    # categorical cells drawn from observed frequencies
    for info in model.missing:
        var = info.var
        meta = graph.metas[var]
        arr = values[var]
        obs = arr[np.isfinite(arr)]
        if info.level2:
            target_rows = [graph.gi.rows_of(g) for g in info.units]
        else:
            target_rows = [np.array([r]) for r in info.units]
        if meta.is_categorical:
            if obs.size == 0:
                raise DataError(f"variable {var!r} has no observed values")
            codes, counts = np.unique(obs.astype(int), return_counts=True)
            probs = counts / counts.sum()
            draws = rng.choice(codes, size=len(target_rows), p=probs)
            for rows, d in zip(target_rows, draws):
                arr[rows] = float(d)
        else:
            if obs.size == 0:
                raise DataError(f"variable {var!r} has no observed values")
            mean = float(np.mean(obs))
            sd = float(np.std(obs, ddof=1)) if obs.size > 1 else 1.0
            draws = mean + 0.1 * sd * rng.standard_normal(len(target_rows))
            span = sd if sd > 0 else 1.0
            lo = info.lower + 1e-6 * span if np.isfinite(info.lower) else -np.inf
            hi = info.upper - 1e-6 * span if np.isfinite(info.upper) else np.inf
            draws = np.clip(draws, lo, hi)
            for rows, d in zip(target_rows, draws):
                arr[rows] = d

    params: dict = {}
    X: dict = {}
    eta: dict = {}
    eta_ranef: dict = {}
    adapt: dict = {}
    for sm in graph.submodels:
        resp = sm.response
        design = model.designs[resp]
        p = design.n_cols
        pr: dict = {}
        if sm.model_type == "mlogit":
            kk = graph.metas[resp].n_categories
            pr["beta"] = 0.1 * rng.standard_normal((kk - 1, p + 1))
        else:
            pr["beta"] = 0.1 * rng.standard_normal(p)
        if sm.has_tau:
            pr["tau"] = 1.0
        if sm.model_type == "clm":
            meta = graph.metas[resp]
            col = values[resp][design.rows]
            obs = col[np.isfinite(col)]
            kk = meta.n_categories
            freqs = np.array([(obs == k).mean() for k in range(1, kk + 1)])
            cum = np.clip(np.cumsum(freqs)[:-1], 0.01, 0.99)
            gammas = np.log(cum / (1 - cum)) + 0.05 * rng.standard_normal(kk - 1)
            gammas = np.sort(gammas)
            # enforce strict increase
            for k in range(1, kk - 1):
                if gammas[k] <= gammas[k - 1]:
                    gammas[k] = gammas[k - 1] + 0.05
            pr["gamma"] = gammas
            pr["delta"] = np.log(np.diff(gammas)) if kk > 2 else np.zeros(0)
        if sm.model_type == "survreg":
            pr["shape"] = 1.0
        if sm.shrinkage:
            pr["tau_beta"] = 1.0
        if sm.mixed:
            q = model.zdesigns[resp].n_effects
            pr["b"] = np.zeros((graph.gi.n_groups, q))
            pr["invD"] = np.eye(q)
            pr["RinvD"] = np.ones(q)
        params[resp] = pr

    if user_inits:
        _apply_user_inits(model, params, values, user_inits)

    for sm in graph.submodels:
        resp = sm.response
        design = model.designs[resp]
        X[resp] = design.build(values)
        if sm.model_type == "mlogit":
            beta = params[resp]["beta"]
            eta[resp] = beta[:, 0][None, :] + X[resp] @ beta[:, 1:].T
        else:
            eta[resp] = X[resp] @ params[resp]["beta"]
        if sm.mixed:
            z = model.zdesigns[resp]
            eta_ranef[resp] = ranef_rows(graph, z, params[resp]["b"])

        # adaptive kernels
        if sm.model_type == "mlogit":
            beta = params[resp]["beta"]
            adapt[f"coef:{resp}"] = AdaptiveVector(
                np.full(beta.size, np.log(INITIAL_STEP)))
        elif sm.model_type not in GAUSSIAN_IDENTITY_TYPES and sm.model_type != "lognorm":
            adapt[f"coef:{resp}"] = AdaptiveVector(
                np.full(design.n_cols, np.log(INITIAL_STEP)))
        if sm.model_type == "clm":
            kk = graph.metas[resp].n_categories
            adapt[f"thresh:{resp}"] = AdaptiveVector(
                np.full(kk - 1, np.log(INITIAL_STEP)))
        if sm.has_tau and sm.family in ("gamma", "beta"):
            adapt[f"tau:{resp}"] = AdaptiveScalar(np.log(INITIAL_STEP))
        if sm.model_type == "survreg":
            adapt[f"shape:{resp}"] = AdaptiveScalar(np.log(INITIAL_STEP))
        if sm.model_type == "glmm_binomial_logit":
            adapt[f"ranef:{resp}"] = AdaptiveVector(
                np.full(graph.gi.n_groups, np.log(INITIAL_STEP)))

    for info in model.missing:
        if not graph.metas[info.var].is_categorical:
            adapt[f"imp:{info.var}"] = AdaptiveVector(
                np.full(info.units.size, np.log(INITIAL_STEP)))

    return ChainState(values=values, params=params, X=X, eta=eta,
                      eta_ranef=eta_ranef, rng=rng, adapt=adapt)


def ranef_rows(graph: ModelGraph, z: RandomDesign, b: np.ndarray) -> np.ndarray:
    """Row-wise random-effects contribution Z_i b_i."""
    out = np.empty(graph.ds.n_rows)
    for g in range(graph.gi.n_groups):
        rows = graph.gi.rows_of(g)
        out[rows] = z.matrix[rows, :] @ b[g]
    return out


def _apply_user_inits(model: CompiledModel, params: dict, values: dict,
                      inits: dict) -> None:
    graph = model.graph
    handled = set()

    def coef_slots(role):
        out = []
        for sm in graph.submodels:
            if (sm.role == "analysis") != (role == "analysis"):
                continue
            out.append(sm)
        return out

    for key, raw_val in inits.items():
        val = np.asarray(raw_val, dtype=float)
        if key == "beta" or key == "alpha":
            sms = coef_slots("analysis" if key == "beta" else "covariate")
            sizes = [params[sm.response]["beta"].size for sm in sms]
            if val.size != sum(sizes):
                raise ConfigError(
                    f"initial values for {key!r} must have length {sum(sizes)}, "
                    f"got {val.size}"
                )
            start = 0
            for sm, size in zip(sms, sizes):
                chunk = val[start:start + size]
                start += size
                shape = params[sm.response]["beta"].shape
                params[sm.response]["beta"] = chunk.reshape(shape)
            handled.add(key)
            continue
        matched = False
        for prefix, field_name in (
            ("tau_", "tau"), ("gamma_", "gamma"), ("delta_", "delta"),
            ("shape_", "shape"), ("D_", "invD"), ("RinvD_", "RinvD"),
            ("b_", "b"),
        ):
            if not key.startswith(prefix):
                continue
            resp = key[len(prefix):]
            if resp not in params or field_name not in params[resp] and \
                    field_name != "invD":
                break
            pr = params[resp]
            if field_name == "tau":
                if val.size != 1 or val.item() <= 0:
                    raise ConfigError(f"initial {key} must be a positive scalar")
                pr["tau"] = float(val.item())
            elif field_name == "shape":
                if val.size != 1 or val.item() <= 0:
                    raise ConfigError(f"initial {key} must be a positive scalar")
                pr["shape"] = float(val.item())
            elif field_name == "gamma":
                if "gamma" not in pr or val.size != pr["gamma"].size:
                    raise ConfigError(f"initial {key} has the wrong length")
                if np.any(np.diff(val) <= 0):
                    raise ConfigError(f"initial {key} must be strictly increasing")
                pr["gamma"] = val.copy()
                pr["delta"] = np.log(np.diff(val)) if val.size > 1 else np.zeros(0)
            elif field_name == "delta":
                if "delta" not in pr or val.size != pr["delta"].size:
                    raise ConfigError(f"initial {key} has the wrong length")
                pr["delta"] = val.copy()
                gam = pr["gamma"]
                for k in range(1, gam.size):
                    gam[k] = gam[k - 1] + np.exp(pr["delta"][k - 1])
            elif field_name == "invD":
                if "invD" not in pr:
                    raise ConfigError(f"no random effects in the model for {resp!r}")
                q = pr["invD"].shape[0]
                if val.shape != (q, q):
                    raise ConfigError(f"initial {key} must be a {q}x{q} matrix")
                pr["invD"] = np.linalg.inv(val)
            elif field_name == "RinvD":
                if "RinvD" not in pr or val.size != pr["RinvD"].size:
                    raise ConfigError(f"initial {key} has the wrong length")
                pr["RinvD"] = val.copy()
            elif field_name == "b":
                if "b" not in pr or val.shape != pr["b"].shape:
                    raise ConfigError(
                        f"initial {key} must have shape {pr['b'].shape}"
                    )
                pr["b"] = val.copy()
            matched = True
            handled.add(key)
            break
        if matched:
            continue
        if key.startswith("imp_"):
            var = key[len("imp_"):]
            info = next((m for m in model.missing if m.var == var), None)
            if info is None:
                raise ConfigError(f"no missing values to initialize for {var!r}")
            if val.size != info.units.size:
                raise ConfigError(
                    f"initial {key} must have length {info.units.size}, got {val.size}"
                )
            arr = values[var]
            if info.level2:
                for g, v in zip(info.units, val):
                    arr[graph.gi.rows_of(g)] = v
            else:
                arr[info.units] = val
            handled.add(key)
            continue
        raise ConfigError(f"unknown initial-value entry {key!r}")


# ---------------------------------------------------------------------------
# Result container


@dataclass
class McmcSamples:
    node_names: tuple
    chains: list  # one (n_stored, n_nodes) array per chain
    iterations: np.ndarray
    settings: McmcSettings
    graph: ModelGraph
    model: CompiledModel
    warnings: list = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    def column(self, name: str) -> int:
        try:
            return self.node_names.index(name)
        except ValueError:
            raise KeyError(f"node {name!r} was not monitored") from None

    def node(self, name: str) -> np.ndarray:
        """Samples of one node, shape (n_chains, n_stored)."""
        j = self.column(name)
        return np.stack([c[:, j] for c in self.chains])

    def pooled(self, name: str) -> np.ndarray:
        """All chains concatenated in chain order."""
        return self.node(name).ravel()
