"""Model graph: one analysis model plus covariate models for incomplete predictors.

Builds the ordered system of submodels that the Gibbs engine samples from: the
user's analysis model first, then one model per covariate that needs one,
ordered so that every covariate model conditions only on completely observed
variables and on variables appearing later in the list. Also owns the default
prior settings, reference-category resolution, and the monitor keyword algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .data import (
    LEVEL_ONE,
    Dataset,
    GroupIndex,
    VariableMeta,
    category_codes,
    group_index,
    infer_variable_meta,
    resolve_refcat,
)
from .errors import ConfigError, DataError
from .formulas import (
    FormulaAst,
    SurvivalResponse,
    Term,
    Variable,
    expand_terms,
    parse_formula,
    render_expr,
    term_dependencies,
)

# ---------------------------------------------------------------------------
# Model types

#: type -> (family, link, human label, mixed?)
MODEL_TYPES = {
    "lm": ("gaussian", "identity", "Linear model", False),
    "glm_gaussian_identity": ("gaussian", "identity", "Linear model", False),
    "glm_gaussian_log": ("gaussian", "log", "Linear model", False),
    "glm_gaussian_inverse": ("gaussian", "inverse", "Linear model", False),
    "glm_binomial_logit": ("binomial", "logit", "Binomial model", False),
    "glm_binomial_probit": ("binomial", "probit", "Binomial model", False),
    "glm_binomial_log": ("binomial", "log", "Binomial model", False),
    "glm_binomial_cloglog": ("binomial", "cloglog", "Binomial model", False),
    "glm_gamma_inverse": ("gamma", "inverse", "Gamma model", False),
    "glm_gamma_identity": ("gamma", "identity", "Gamma model", False),
    "glm_gamma_log": ("gamma", "log", "Gamma model", False),
    "glm_poisson_log": ("poisson", "log", "Poisson model", False),
    "glm_poisson_identity": ("poisson", "identity", "Poisson model", False),
    "lognorm": ("lognorm", "identity", "Log-normal model", False),
    "betareg": ("beta", "logit", "Beta model", False),
    "clm": ("ordinal", "logit", "Cumulative logit model", False),
    "mlogit": ("multinomial", "logit", "Multinomial logit model", False),
    "lmm": ("gaussian", "identity", "Linear mixed model", True),
    "glmm_binomial_logit": ("binomial", "logit", "Binomial mixed model", True),
    "survreg": ("weibull", "log", "Weibull survival model", False),
}

#: model types whose likelihood carries a residual precision parameter
TYPES_WITH_TAU = {
    "lm",
    "glm_gaussian_identity",
    "glm_gaussian_log",
    "glm_gaussian_inverse",
    "glm_gamma_inverse",
    "glm_gamma_identity",
    "glm_gamma_log",
    "lognorm",
    "betareg",
    "lmm",
}

#: gaussian-identity types: conjugate coefficient updates, scaled response
GAUSSIAN_IDENTITY_TYPES = {"lm", "glm_gaussian_identity", "lmm"}


def family_of(model_type: str) -> str:
    return MODEL_TYPES[model_type][0]


def link_of(model_type: str) -> str:
    return MODEL_TYPES[model_type][1]


def label_of(model_type: str) -> str:
    return MODEL_TYPES[model_type][2]


def is_mixed(model_type: str) -> bool:
    return MODEL_TYPES[model_type][3]


def select_model_type(meta: VariableMeta, top_level: bool) -> str:
    """Default model type for a covariate, given whether it sits at the top
    of the grouping hierarchy (group-level variables and all variables of
    ungrouped data) or varies within groups."""
    if top_level:
        if meta.vtype == "continuous":
            return "lm"
        if meta.vtype == "binary":
            return "glm_binomial_logit"
        if meta.vtype == "ordered":
            return "clm"
        return "mlogit"
    if meta.vtype == "continuous":
        return "lmm"
    if meta.vtype == "binary":
        return "glmm_binomial_logit"
    raise ConfigError(
        f"no model is available for the categorical variable {meta.name!r} "
        "measured below the top grouping level"
    )


# ---------------------------------------------------------------------------
# Default hyperparameters


@dataclass(frozen=True)
class NormHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4
    shape_tau: float = 0.01
    rate_tau: float = 0.01


@dataclass(frozen=True)
class GammaHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4
    shape_tau: float = 0.01
    rate_tau: float = 0.01


@dataclass(frozen=True)
class BetaHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4
    shape_tau: float = 0.01
    rate_tau: float = 0.01


@dataclass(frozen=True)
class BinomHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4


@dataclass(frozen=True)
class PoissonHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4


@dataclass(frozen=True)
class MultinomialHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4


@dataclass(frozen=True)
class OrdinalHyper:
    mu_reg: float = 0.0
    tau_reg: float = 1e-4
    mu_delta: float = 0.0
    tau_delta: float = 1e-4


@dataclass(frozen=True)
class RanefHyper:
    shape_diag: float = 0.01
    rate_diag: float = 0.001
    KinvD: object = "nranef + 1.0"  # Wishart degrees of freedom; resolved per model


@dataclass(frozen=True)
class SurvHyper:
    mu_reg: float = 0.0
    tau_reg: float = 0.001
    rate_shape_weibull: float = 0.01  # exponential prior rate for the Weibull shape


@dataclass(frozen=True)
class RidgeHyper:
    shape: float = 0.01
    rate: float = 0.01


@dataclass(frozen=True)
class HyperParameters:
    norm: NormHyper = field(default_factory=NormHyper)
    gamma: GammaHyper = field(default_factory=GammaHyper)
    beta: BetaHyper = field(default_factory=BetaHyper)
    binom: BinomHyper = field(default_factory=BinomHyper)
    poisson: PoissonHyper = field(default_factory=PoissonHyper)
    multinomial: MultinomialHyper = field(default_factory=MultinomialHyper)
    ordinal: OrdinalHyper = field(default_factory=OrdinalHyper)
    ranef: RanefHyper = field(default_factory=RanefHyper)
    surv: SurvHyper = field(default_factory=SurvHyper)
    ridge: RidgeHyper = field(default_factory=RidgeHyper)

    def for_family(self, family: str):
        return {
            "gaussian": self.norm,
            "lognorm": self.norm,
            "gamma": self.gamma,
            "beta": self.beta,
            "binomial": self.binom,
            "poisson": self.poisson,
            "multinomial": self.multinomial,
            "ordinal": self.ordinal,
            "weibull": self.surv,
        }[family]

    def kinv_d(self, nranef: int) -> float:
        if isinstance(self.ranef.KinvD, str):
            return nranef + 1.0
        return float(self.ranef.KinvD)


def default_hyperparameters() -> HyperParameters:
    return HyperParameters()


_POSITIVE_FIELDS = {"tau_reg", "shape_tau", "rate_tau", "tau_delta", "shape_diag",
                    "rate_diag", "rate_shape_weibull", "shape", "rate", "KinvD"}


def hyperparameters_from(overrides: dict | None) -> HyperParameters:
    """Defaults updated with a nested ``{group: {field: value}}`` override map."""
    hyper = default_hyperparameters()
    if not overrides:
        return hyper
    updates = {}
    for group, values in overrides.items():
        current = getattr(hyper, group, None)
        if current is None or not isinstance(values, dict):
            raise ConfigError(f"unknown hyperparameter group {group!r}")
        valid = {f.name for f in fields(current)}
        for name, value in values.items():
            if name not in valid:
                raise ConfigError(f"unknown hyperparameter {group}.{name}")
            if name in _POSITIVE_FIELDS:
                if not isinstance(value, (int, float)) or not value > 0:
                    raise ConfigError(f"hyperparameter {group}.{name} must be a positive number")
        updates[group] = replace(current, **values)
    return replace(hyper, **updates)


# ---------------------------------------------------------------------------
# Submodels and the graph


@dataclass
class SubModel:
    response: str
    model_type: str
    role: str  # 'analysis' | 'covariate' | 'auxiliary'
    predictor_terms: tuple  # Terms, intercept excluded
    intercept: bool
    group: str | None = None
    random_terms: tuple = ()
    random_intercept: bool = True
    trunc: tuple | None = None
    shrinkage: bool = False
    survival: SurvivalResponse | None = None

    @property
    def family(self) -> str:
        return family_of(self.model_type)

    @property
    def link(self) -> str:
        return link_of(self.model_type)

    @property
    def mixed(self) -> bool:
        return is_mixed(self.model_type)

    @property
    def has_tau(self) -> bool:
        return self.model_type in TYPES_WITH_TAU


@dataclass
class ModelGraph:
    submodels: list
    ds: Dataset
    metas: dict
    grouping: str | None
    gi: GroupIndex | None
    refcats: dict  # var -> 0-based reference index
    codes: dict  # categorical var -> float codes 1..K (0 missing)
    hyper: HyperParameters
    contrast_coding: str
    monitor_flags: dict
    monitor_other: tuple
    scale_option: object  # True | False | list of variable names
    analysis_ast: FormulaAst
    warnings: list = field(default_factory=list)

    @property
    def analysis(self) -> SubModel:
        return self.submodels[0]

    @property
    def covariate_models(self) -> list:
        return self.submodels[1:]

    def submodel_for(self, response: str) -> SubModel:
        for sm in self.submodels:
            if sm.response == response:
                return sm
        raise KeyError(response)

    @property
    def incomplete_vars(self) -> set:
        return {name for name, m in self.metas.items() if m.incomplete}

    def meta(self, name: str) -> VariableMeta:
        return self.metas[name]


def _level_rank(meta: VariableMeta, grouping: str | None) -> int:
    if grouping is None:
        return 0
    return 0 if meta.level == LEVEL_ONE else 1


def order_submodels(
    metas: dict,
    candidates: list,
    formula_order: dict,
    grouping: str | None = None,
) -> list:
    """Order covariate-model responses for the graph.

    Lower-level variables come first, then group-level ones. Within a level,
    incomplete variables are sorted by number of missing values (descending),
    followed by complete variables that still need a model; remaining ties
    keep formula appearance order. Each model conditions on the variables
    occurring *later* in the resulting list plus all complete variables.
    """

    def key(name):
        meta = metas[name]
        return (
            _level_rank(meta, grouping),
            0 if meta.incomplete else 1,
            -meta.n_missing,
            formula_order.get(name, len(formula_order)),
            name,
        )

    return sorted(candidates, key=key)


# ---------------------------------------------------------------------------
# Graph construction


def _as_ast(formula, one_sided_ok=False) -> FormulaAst:
    if isinstance(formula, FormulaAst):
        return formula
    return parse_formula(formula, one_sided_ok=one_sided_ok)


def _response_name(ast: FormulaAst) -> str:
    resp = ast.response
    if isinstance(resp, Variable):
        return resp.name
    raise ConfigError("model formula needs a plain variable response")


def _check_positive(name, values, mask):
    vals = values[~mask]
    if vals.size and vals.min() <= 0:
        raise DataError(f"{name!r} must be strictly positive for its model family")


def _check_unit_interval(name, values, mask):
    vals = values[~mask]
    if vals.size and (vals.min() <= 0 or vals.max() >= 1):
        raise DataError(f"{name!r} must lie strictly inside (0, 1) for a beta model")


def _check_counts(name, values, mask):
    vals = values[~mask]
    if vals.size and (np.any(vals < 0) or np.any(vals != np.round(vals))):
        raise DataError(f"{name!r} must contain non-negative integers for a poisson model")


_RESPONSE_CHECKS = {
    "gamma": _check_positive,
    "lognorm": _check_positive,
    "beta": _check_unit_interval,
    "poisson": _check_counts,
}


def build_model_graph(
    formulas,
    ds: Dataset,
    *,
    analysis_type: str | None = None,
    models: dict | None = None,
    auxvars=None,
    refcats: dict | str | None = None,
    no_model=None,
    trunc: dict | None = None,
    shrinkage=None,
    contrasts: str = "dummy",
    types: dict | None = None,
    hyperparameters: dict | HyperParameters | None = None,
    monitor_params: dict | None = None,
    scale_vars=True,
) -> ModelGraph:
    """Assemble the joint system of analysis and covariate models.

    ``formulas`` is one analysis formula, optionally followed by formulas
    that explicitly specify the predictor structure of individual covariate
    models. ``models`` overrides the automatically selected model type per
    variable; ``auxvars`` is a one-sided formula of extra predictors for the
    covariate models; ``no_model`` lists completely observed variables to
    treat as fixed data even where a model would normally be required.
    """
    if isinstance(formulas, (str, FormulaAst)):
        formulas = [formulas]
    if not formulas:
        raise ConfigError("at least one model formula is required")
    asts = [_as_ast(f) for f in formulas]
    analysis_ast = asts[0]

    # grouping comes from the random-effects part
    groups = {rp.group for ast in asts for rp in ast.random_parts}
    if len(groups) > 1:
        raise ConfigError(
            f"only one grouping level is supported; found groups {sorted(groups)}"
        )
    grouping = next(iter(groups)) if groups else None

    aux_ast = _as_ast(auxvars, one_sided_ok=True) if auxvars is not None else None

    # referenced variables must exist before typing
    referenced = set()
    for ast in asts:
        referenced |= term_dependencies(ast)
    if aux_ast is not None:
        referenced |= term_dependencies(aux_ast)
    ds.require(sorted(referenced))

    metas = infer_variable_meta(ds, grouping=grouping, overrides=types)
    gi = group_index(ds, grouping) if grouping else None
    warnings: list = []

    # -- analysis response and terms
    survival = None
    if isinstance(analysis_ast.response, SurvivalResponse):
        survival = analysis_ast.response
        response = None
    else:
        response = _response_name(analysis_ast)
    analysis_terms = tuple(expand_terms(analysis_ast.fixed))

    random_terms: tuple = ()
    random_intercept = True
    if analysis_ast.random_parts:
        part = analysis_ast.random_parts[0]
        if len(analysis_ast.random_parts) > 1:
            raise ConfigError("only a single random-effects part is supported")
        random_terms = tuple(expand_terms(part.terms)) if part.terms is not None else ()
        random_intercept = part.intercept
        for term in random_terms:
            for dep in sorted(term_dependencies(term)):
                if metas[dep].incomplete:
                    raise ConfigError(
                        f"random-effects variable {dep!r} has missing values; "
                        "random-effects design variables must be complete"
                    )

    # -- analysis model type
    models = dict(models or {})
    if analysis_type is not None:
        if analysis_type not in MODEL_TYPES:
            raise ConfigError(f"unknown model type {analysis_type!r}")
        a_type = analysis_type
    elif response is not None and response in models:
        if models[response] not in MODEL_TYPES:
            raise ConfigError(f"unknown model type {models[response]!r}")
        a_type = models[response]
    elif survival is not None:
        a_type = "survreg"
    else:
        meta = metas[response]
        top = grouping is None or meta.level == grouping
        if analysis_ast.random_parts and meta.vtype == "continuous":
            a_type = "lmm"
        elif analysis_ast.random_parts and meta.vtype == "binary":
            a_type = "glmm_binomial_logit"
        elif analysis_ast.random_parts:
            raise ConfigError(
                f"no mixed model is available for response {response!r} of type {meta.vtype}"
            )
        else:
            a_type = select_model_type(meta, top_level=True)
            _ = top
    if is_mixed(a_type) and not analysis_ast.random_parts:
        raise ConfigError(f"model type {a_type!r} needs a random-effects part (terms | group)")
    if response is not None:
        rmeta = metas[response]
        discrete = family_of(a_type) in ("binomial", "ordinal", "multinomial")
        if rmeta.is_categorical and not discrete:
            raise ConfigError(
                f"model type {a_type!r} cannot model the categorical {response!r}"
            )
        if not rmeta.is_categorical and discrete:
            raise ConfigError(
                f"model type {a_type!r} cannot model the continuous {response!r}"
            )
    if survival is not None and a_type != "survreg":
        raise ConfigError("a survival response requires the Weibull survival model")

    # survival bookkeeping: time and event variables must be complete
    if survival is not None:
        for dep in sorted(term_dependencies(survival)):
            if metas[dep].n_missing > 0 or ds[dep].n_missing_cells > 0:
                raise DataError(f"survival response variable {dep!r} has missing values")
        response = f"Surv({render_expr(survival.time)}, {render_expr(survival.event)})"

    analysis_responses = {response} | (
        set(term_dependencies(survival)) if survival is not None else set()
    )

    # -- covariate pool
    fixed_deps: list = []
    for term in analysis_terms:
        for dep in sorted(term_dependencies(term)):
            if dep not in fixed_deps:
                fixed_deps.append(dep)
    for term in random_terms:
        for dep in sorted(term_dependencies(term)):
            if dep not in fixed_deps:
                fixed_deps.append(dep)
    fixed_deps = [d for d in fixed_deps if d not in analysis_responses and d != grouping]

    aux_terms: list = []
    if aux_ast is not None:
        if aux_ast.fixed is not None:
            aux_terms = list(expand_terms(aux_ast.fixed))
        for term in aux_terms:
            if term_dependencies(term) & analysis_responses:
                raise ConfigError("auxiliary variables cannot involve the analysis response")

    aux_deps: list = []
    for term in aux_terms:
        for dep in sorted(term_dependencies(term)):
            if dep not in aux_deps and dep not in fixed_deps and dep != grouping:
                aux_deps.append(dep)

    pool_vars = fixed_deps + aux_deps  # appearance order: analysis first, then auxiliary

    # pool terms: per variable, the auxiliary function terms given for it or a
    # plain main effect; multi-variable auxiliary terms are kept as given
    aux_terms_by_var: dict = {}
    extra_aux_terms: list = []
    for term in aux_terms:
        deps = term_dependencies(term)
        if len(deps) == 1:
            aux_terms_by_var.setdefault(next(iter(deps)), []).append(term)
        else:
            extra_aux_terms.append(term)

    pool_terms: list = []
    for var in pool_vars:
        # an auxiliary function term replaces the linear effect of a purely
        # auxiliary variable; analysis covariates keep their main effect too
        terms_for_var = list(aux_terms_by_var.get(var, ()))
        if var in fixed_deps or not terms_for_var:
            terms_for_var.insert(0, Term((Variable(var),)))
        for term in terms_for_var:
            if term not in pool_terms:
                pool_terms.append(term)
    for term in extra_aux_terms:
        if term not in pool_terms:
            pool_terms.append(term)

    no_model = list(no_model or [])
    for var in no_model:
        if var not in metas:
            raise ConfigError(f"no_model variable {var!r} is not in the data")
        if metas[var].incomplete:
            raise ConfigError(
                f"no_model variable {var!r} has missing values and needs a model"
            )

    # -- which variables need their own submodel
    incomplete_pool = [v for v in pool_vars if metas[v].incomplete]
    top_name = grouping if grouping else LEVEL_ONE
    incomplete_levels = {metas[v].level for v in incomplete_pool}
    need_model: list = []
    for var in pool_vars:
        meta = metas[var]
        if var in no_model:
            if meta.level == LEVEL_ONE and grouping and grouping in incomplete_levels:
                warnings.append(
                    f"treating {var!r} as fixed data implies incomplete group-level "
                    "variables are independent of it"
                )
            continue
        if meta.incomplete:
            need_model.append(var)
        elif meta.level == LEVEL_ONE and grouping and grouping in incomplete_levels:
            # complete lower-level variables need models whenever a variable
            # at a higher level is incomplete
            need_model.append(var)

    formula_rank = {v: i for i, v in enumerate(pool_vars)}
    ordered = order_submodels(metas, need_model, formula_rank, grouping)

    # -- explicit covariate-model formulas
    explicit: dict = {}
    for ast in asts[1:]:
        name = _response_name(ast)
        if name in analysis_responses:
            raise ConfigError(
                "multiple analysis models are not supported; additional formulas "
                "may only describe covariate models"
            )
        if name not in ordered:
            raise ConfigError(
                f"formula given for {name!r}, but no covariate model is needed for it"
            )
        explicit[name] = ast

    # -- model type overrides
    for var in models:
        if var not in ordered and var != response:
            raise ConfigError(f"model type given for {var!r}, which has no model")
        if models[var] not in MODEL_TYPES:
            raise ConfigError(f"unknown model type {models[var]!r} for {var!r}")

    # -- reference categories
    if refcats is None or isinstance(refcats, str):
        refcats = {v: refcats for v in metas if metas[v].is_categorical}
    ref_idx: dict = {}
    codes: dict = {}
    for var, meta in metas.items():
        if meta.is_categorical and var != grouping:
            codes[var] = category_codes(ds, meta)
            spec = refcats.get(var)
            ref_idx[var] = resolve_refcat(meta, spec, codes[var])
    unknown_ref = set(refcats) - set(metas)
    if unknown_ref:
        raise ConfigError(f"refcats given for unknown variable(s): {', '.join(sorted(unknown_ref))}")
    for var in refcats:
        if var in metas and not metas[var].is_categorical:
            raise ConfigError(f"refcats given for non-categorical variable {var!r}")

    trunc = dict(trunc or {})
    for var, bounds in trunc.items():
        if var not in metas:
            raise ConfigError(f"trunc given for unknown variable {var!r}")
        if metas[var].is_categorical:
            raise ConfigError(f"trunc only applies to continuous variables, not {var!r}")
        lo, hi = (bounds + [None, None])[:2] if isinstance(bounds, list) else bounds
        lo = None if lo is None else float(lo)
        hi = None if hi is None else float(hi)
        if lo is not None and hi is not None and not lo < hi:
            raise ConfigError(f"trunc bounds for {var!r} must satisfy lower < upper")
        trunc[var] = (lo, hi)

    if shrinkage is None:
        shrink_map: dict = {}
    elif isinstance(shrinkage, bool):
        shrink_map = {name: shrinkage for name in [response] + ordered}
    elif isinstance(shrinkage, dict):
        shrink_map = dict(shrinkage)
    else:
        raise ConfigError("shrinkage must be a bool or a {response: bool} map")

    # -- the analysis submodel
    analysis_intercept = analysis_ast.intercept
    if a_type in ("clm", "mlogit") and analysis_intercept:
        analysis_intercept = False  # category-specific intercepts live in the family
    analysis = SubModel(
        response=response,
        model_type=a_type,
        role="analysis",
        predictor_terms=analysis_terms,
        intercept=analysis_intercept,
        group=grouping if is_mixed(a_type) else None,
        random_terms=random_terms,
        random_intercept=random_intercept,
        trunc=None,
        shrinkage=bool(shrink_map.get(response, False)),
        survival=survival,
    )
    if survival is None:
        check = _RESPONSE_CHECKS.get(analysis.family)
        if check:
            check(response, ds[response].values, ds[response].missing)

    # -- covariate submodels
    submodels = [analysis]
    aux_only = set(aux_deps)
    for pos, var in enumerate(ordered):
        meta = metas[var]
        top = grouping is None or meta.level != LEVEL_ONE
        mtype = models.get(var) or select_model_type(meta, top_level=top)
        if is_mixed(mtype) and top:
            raise ConfigError(f"mixed model type {mtype!r} is invalid for group-level {var!r}")
        if meta.is_categorical and family_of(mtype) not in ("binomial", "ordinal", "multinomial"):
            raise ConfigError(f"model type {mtype!r} cannot model the categorical {var!r}")
        if not meta.is_categorical and family_of(mtype) in ("binomial", "ordinal", "multinomial"):
            raise ConfigError(f"model type {mtype!r} cannot model the continuous {var!r}")

        if var in explicit:
            ast = explicit[var]
            terms = tuple(expand_terms(ast.fixed))
            intercept = ast.intercept
            for dep in term_dependencies(ast):
                if dep != var and dep != grouping and metas[dep].incomplete and dep not in ordered:
                    raise ConfigError(
                        f"predictor {dep!r} of the model for {var!r} is incomplete "
                        "and has no model of its own"
                    )
        else:
            later = set(ordered[pos + 1:])
            available = {
                v
                for v in pool_vars
                if v != var and (not metas[v].incomplete or v in later)
            }
            available |= {v for v in no_model}
            if meta.level != LEVEL_ONE:
                available = {v for v in available if metas[v].level != LEVEL_ONE}
            terms_list = []
            for term in pool_terms:
                deps = term_dependencies(term)
                if var in deps or not deps <= available:
                    continue
                terms_list.append(term)
            # complete-variable terms keep pool order; terms involving
            # incomplete variables follow in conditioning order (fewest
            # missing first, i.e. reverse list order)
            def _sort_key(term):
                deps = term_dependencies(term)
                inc = [ordered.index(d) for d in deps if d in ordered]
                if not inc:
                    return (0, pool_terms.index(term))
                return (1, -min(inc), pool_terms.index(term))

            terms_list.sort(key=_sort_key)
            terms = tuple(terms_list)
            intercept = mtype not in ("clm", "mlogit")

        check = _RESPONSE_CHECKS.get(family_of(mtype))
        if check:
            check(var, ds[var].values, ds[var].missing)

        submodels.append(
            SubModel(
                response=var,
                model_type=mtype,
                role="auxiliary" if var in aux_only else "covariate",
                predictor_terms=terms,
                intercept=intercept if mtype not in ("clm", "mlogit") else False,
                group=grouping if is_mixed(mtype) else None,
                random_terms=(),
                random_intercept=True,
                trunc=trunc.get(var),
                shrinkage=bool(shrink_map.get(var, False)),
            )
        )

    # -- every predictor dependency must be complete or modelled
    modelled = {sm.response for sm in submodels}
    for sm in submodels:
        for term in sm.predictor_terms:
            for dep in sorted(term_dependencies(term)):
                if dep == grouping:
                    continue
                if metas[dep].incomplete and dep not in modelled:
                    raise ConfigError(
                        f"variable {dep!r} is incomplete but has no model; "
                        "remove it from no_model or complete the data"
                    )

    monitor_flags, monitor_other = resolve_monitors(monitor_params)

    return ModelGraph(
        submodels=submodels,
        ds=ds,
        metas=metas,
        grouping=grouping,
        gi=gi,
        refcats=ref_idx,
        codes=codes,
        hyper=(
            hyperparameters
            if isinstance(hyperparameters, HyperParameters)
            else hyperparameters_from(hyperparameters)
        ),
        contrast_coding=contrasts,
        monitor_flags=monitor_flags,
        monitor_other=monitor_other,
        scale_option=scale_vars,
        analysis_ast=analysis_ast,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Monitor keyword algebra

MONITOR_LEAVES = (
    "betas",
    "sigma_main",
    "tau_main",
    "gamma_main",
    "shape_main",
    "D_main",
    "ranef_main",
    "invD_main",
    "RinvD_main",
    "alphas",
    "tau_other",
    "sigma_other",
    "gamma_other",
    "delta_other",
    "imps",
    "ranef_other",
    "D_other",
    "invD_other",
    "RinvD_other",
)

MONITOR_GROUPS = {
    "analysis_main": ("betas", "sigma_main", "tau_main", "gamma_main", "shape_main", "D_main"),
    "analysis_random": ("ranef_main", "D_main", "invD_main", "RinvD_main"),
    "other_models": ("alphas", "tau_other", "sigma_other", "gamma_other", "delta_other"),
}


def resolve_monitors(params: dict | None):
    """Resolve monitor keywords to concrete leaf flags.

    Group keywords switch all their members; explicit leaf keywords override
    group settings. The default monitors the main parameters of the analysis
    model only. ``other`` holds explicit node names.
    """
    params = dict(params or {})
    other = params.pop("other", ())
    if isinstance(other, str):
        other = (other,)
    unknown = set(params) - set(MONITOR_LEAVES) - set(MONITOR_GROUPS)
    if unknown:
        raise ConfigError(f"unknown monitor keyword(s): {', '.join(sorted(unknown))}")

    flags = {leaf: False for leaf in MONITOR_LEAVES}
    groups = {"analysis_main": True, "analysis_random": False, "other_models": False}
    for name, value in params.items():
        if name in groups:
            groups[name] = bool(value)
    for group, on in groups.items():
        if on:
            for leaf in MONITOR_GROUPS[group]:
                flags[leaf] = True
    # explicit leaves win over group settings
    for name, value in params.items():
        if name in flags:
            flags[name] = bool(value)
    return flags, tuple(other)


# ---------------------------------------------------------------------------
# Reporting helpers


def models_table(graph: ModelGraph) -> dict:
    """Response -> model type string, in graph order.

    The analysis entry reports gaussian-identity models through their GLM
    family name, mirroring how fitted-model listings present them.
    """
    out = {}
    for sm in graph.submodels:
        mtype = sm.model_type
        if sm.role == "analysis":
            if mtype == "lm":
                mtype = "glm_gaussian_identity"
            elif mtype == "lmm":
                mtype = "glmm_gaussian_identity"
        out[sm.response] = mtype
    return out


def describe_models(graph: ModelGraph, column_names: dict | None = None) -> str:
    """Human-readable listing of every submodel: family, link, predictors.

    ``column_names`` may map responses to design column names (including
    category intercepts) for display; otherwise term names are shown.
    """
    blocks = []
    for sm in graph.submodels:
        lines = [f'{label_of(sm.model_type)} for "{sm.response}"']
        if sm.family not in ("ordinal", "multinomial"):
            lines.append(f"   family: {sm.family}")
            lines.append(f"   link: {sm.link}")
        if column_names and sm.response in column_names:
            cols = list(column_names[sm.response])
        else:
            cols = ["(Intercept)"] if sm.intercept or sm.model_type == "mlogit" else []
            cols += [t.name for t in sm.predictor_terms]
        lines.append("* Predictor variables:")
        lines.append("  " + ", ".join(cols))
        if sm.mixed:
            rcols = ["(Intercept)"] if sm.random_intercept else []
            rcols += [t.name for t in sm.random_terms]
            lines.append(f"* Random effects ({sm.group}):")
            lines.append("  " + ", ".join(rcols))
        if sm.trunc is not None:
            lo, hi = sm.trunc
            lines.append(
                f"* Truncated to ({'-Inf' if lo is None else lo}, "
                f"{'Inf' if hi is None else hi})"
            )
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks)
