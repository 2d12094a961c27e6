"""Design matrices for submodels, with incremental updates for imputed values.

Columns built purely from completely observed variables are computed once and
shared; columns involving incomplete variables are recomputed for the affected
rows whenever an imputed value changes. Continuous columns are shifted and
scaled with statistics frozen at build time so the sampler works on a
standardized scale while results are reported on the data scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LEVEL_ONE, ScaleStats, contrast_names, encode_contrasts
from .errors import ConfigError
from .formulas import (
    INTERCEPT_NAME,
    KNOWN_FUNCS,
    Arith,
    Func,
    Literal,
    Term,
    Variable,
    render_expr,
)
from .models import GAUSSIAN_IDENTITY_TYPES, ModelGraph, SubModel

_NUMPY_FUNCS = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}


def evaluate_numeric(expr, values: dict, rows) -> np.ndarray:
    """Evaluate an arithmetic expression over the given rows of the data.

    Unsupported operations surface as configuration errors; numerically
    undefined results (log of a negative, division by zero) propagate as
    NaN/inf and are handled downstream as zero-likelihood states.
    """
    if isinstance(expr, Variable):
        return values[expr.name][rows]
    if isinstance(expr, Literal):
        n = len(rows) if hasattr(rows, "__len__") else np.size(rows)
        return np.full(n, float(expr.value))
    if isinstance(expr, Func):
        if expr.name == "I":
            return evaluate_numeric(expr.args[0], values, rows)
        fn = _NUMPY_FUNCS.get(expr.name)
        if fn is None:
            raise ConfigError(f"cannot evaluate unknown function {expr.name!r}")
        if len(expr.args) != 1:
            raise ConfigError(f"{expr.name}() takes exactly one argument")
        with np.errstate(all="ignore"):
            return fn(evaluate_numeric(expr.args[0], values, rows))
    if isinstance(expr, Arith):
        with np.errstate(all="ignore"):
            if expr.op == "neg":
                return -evaluate_numeric(expr.args[0], values, rows)
            left = evaluate_numeric(expr.args[0], values, rows)
            right = evaluate_numeric(expr.args[1], values, rows)
            if expr.op == "+":
                return left + right
            if expr.op == "-":
                return left - right
            if expr.op == "*":
                return left * right
            if expr.op == "/":
                return left / right
            if expr.op == "^":
                return np.power(left, right)
    raise ConfigError(f"cannot evaluate expression of type {type(expr).__name__}")


@dataclass
class ColumnBlock:
    term: Term | None  # None for the intercept
    names: tuple
    sl: slice
    dynamic: bool
    deps: frozenset
    all_categorical: bool  # every factor is a categorical variable


class SubModelDesign:
    """Fixed-effects design matrix of one submodel.

    ``rows`` are the data rows the model runs on: every row for models of
    row-level variables, one representative row per group for models of
    group-level variables.
    """

    def __init__(self, graph: ModelGraph, sm: SubModel):
        self.graph = graph
        self.sm = sm
        metas = graph.metas
        ds = graph.ds

        if sm.group is None and graph.grouping and sm.response in metas and \
                metas[sm.response].level != LEVEL_ONE:
            self.rows = graph.gi.rep_rows
        else:
            self.rows = np.arange(ds.n_rows)
        self.n_units = len(self.rows)

        incomplete = graph.incomplete_vars
        terms: list = []
        if sm.intercept:
            terms.append(None)
        terms.extend(sm.predictor_terms)

        # evaluate blocks on raw data to freeze shapes, names and scaling
        raw = raw_values(graph)
        self.blocks: list = []
        names: list = []
        start = 0
        for term in terms:
            if term is None:
                block_names = (INTERCEPT_NAME,)
                cols = np.ones((self.n_units, 1))
                deps: frozenset = frozenset()
                all_cat = False
            else:
                cols, block_names, all_cat = self._eval_term(term, raw)
                deps = frozenset(
                    d for d in _term_deps(term) if d in metas
                )
            sl = slice(start, start + len(block_names))
            start += len(block_names)
            dyn = bool(deps & incomplete)
            self.blocks.append(ColumnBlock(term, tuple(block_names), sl, dyn, deps, all_cat))
            names.extend(block_names)
        self.names = tuple(names)
        self.n_cols = start
        self.intercept_col = 0 if sm.intercept else None

        self._static = self._assemble(raw)  # NaN where inputs are missing
        self.scale = self._freeze_scaling(self._static)
        self._apply_scaling(self._static)

        # response scaling (gaussian-identity models only)
        self.mu_y, self.sd_y = 0.0, 1.0
        if sm.model_type in GAUSSIAN_IDENTITY_TYPES and self._scaling_on():
            col = ds[sm.response]
            obs = col.values[~col.missing]
            if obs.size >= 2 and np.std(obs, ddof=1) > 0:
                self.mu_y = float(np.mean(obs))
                self.sd_y = float(np.std(obs, ddof=1))

    # -- construction helpers

    def _eval_term(self, term: Term, values: dict, rows=None):
        if rows is None:
            rows = self.rows
        factor_blocks = []
        all_cat = True
        for factor in term.factors:
            if isinstance(factor, Variable) and self.graph.metas[factor.name].is_categorical:
                meta = self.graph.metas[factor.name]
                codes = values[factor.name][rows]
                ref = self.graph.refcats[factor.name]
                cols = encode_contrasts(
                    codes, meta.n_categories, ref, self.graph.contrast_coding
                )
                fnames = contrast_names(factor.name, meta.categories, ref)
            else:
                all_cat = False
                col = evaluate_numeric(factor, values, rows)
                cols = np.asarray(col, dtype=float)[:, None]
                fnames = [render_expr(factor)]
            factor_blocks.append((cols, fnames))
        cols, names = factor_blocks[0]
        cols = cols.copy()
        names = list(names)
        for nxt_cols, nxt_names in factor_blocks[1:]:
            merged = np.empty((cols.shape[0], cols.shape[1] * nxt_cols.shape[1]))
            merged_names = []
            k = 0
            for i in range(cols.shape[1]):
                for j in range(nxt_cols.shape[1]):
                    merged[:, k] = cols[:, i] * nxt_cols[:, j]
                    merged_names.append(f"{names[i]}:{nxt_names[j]}")
                    k += 1
            cols, names = merged, merged_names
        return cols, names, all_cat and len(term.factors) > 0

    def _assemble(self, values: dict) -> np.ndarray:
        mat = np.empty((self.n_units, self.n_cols))
        for block in self.blocks:
            if block.term is None:
                mat[:, block.sl] = 1.0
            else:
                mat[:, block.sl] = self._eval_term(block.term, values)[0]
        return mat

    def _scaling_on(self) -> bool:
        return self.graph.scale_option is not False

    def _scale_wanted(self, block: ColumnBlock) -> bool:
        opt = self.graph.scale_option
        if opt is False or block.term is None or block.all_categorical:
            return False
        if opt is True:
            return True
        listed = set(opt)
        return bool(block.deps) and block.deps <= listed

    def _freeze_scaling(self, mat: np.ndarray):
        scale: list = [None] * self.n_cols
        for block in self.blocks:
            if not self._scale_wanted(block):
                continue
            for j in range(block.sl.start, block.sl.stop):
                col = mat[:, j]
                finite = col[np.isfinite(col)]
                if finite.size < 2:
                    continue
                sd = float(np.std(finite, ddof=1))
                if sd == 0:
                    continue
                scale[j] = ScaleStats(float(np.mean(finite)), sd)
        return scale

    def _apply_scaling(self, mat: np.ndarray, rows=None) -> None:
        for j, st in enumerate(self.scale):
            if st is None:
                continue
            if rows is None:
                mat[:, j] = (mat[:, j] - st.mean) / st.sd
            else:
                mat[rows, j] = (mat[rows, j] - st.mean) / st.sd

    # -- runtime API

    def build(self, values: dict) -> np.ndarray:
        """Full design matrix for the current variable values (scaled)."""
        mat = self._static.copy()
        self.refresh(mat, values)
        return mat

    def refresh(self, mat: np.ndarray, values: dict, positions=None, var: str | None = None):
        """Recompute dynamic columns in place.

        ``positions`` indexes rows of the design matrix (not data rows);
        ``var`` restricts the work to blocks depending on that variable.
        """
        for block in self.blocks:
            if not block.dynamic:
                continue
            if var is not None and var not in block.deps:
                continue
            if positions is None:
                mat[:, block.sl] = self._eval_term(block.term, values)[0]
            else:
                rows = self.rows[positions]
                cols = self._eval_term(block.term, values, rows)[0]
                mat[positions, block.sl] = cols
            for j in range(block.sl.start, block.sl.stop):
                st = self.scale[j]
                if st is not None:
                    if positions is None:
                        mat[:, j] = (mat[:, j] - st.mean) / st.sd
                    else:
                        mat[positions, j] = (mat[positions, j] - st.mean) / st.sd

    def data_scale_matrix(self, values: dict, n_rows: int) -> np.ndarray:
        """Unscaled design matrix for new value arrays of length ``n_rows``.

        ``values`` maps every dependency to raw numbers (category codes for
        categorical variables); no shifting or scaling is applied, so the
        product with data-scale coefficients is the data-scale predictor.
        """
        rows = np.arange(n_rows)
        mat = np.empty((n_rows, self.n_cols))
        for block in self.blocks:
            if block.term is None:
                mat[:, block.sl] = 1.0
            else:
                mat[:, block.sl] = self._eval_term(block.term, values, rows)[0]
        return mat

    def dynamic_vars(self) -> set:
        out: set = set()
        for block in self.blocks:
            if block.dynamic:
                out |= block.deps & self.graph.incomplete_vars
        return out

    def blocks_for(self, var: str):
        return [b for b in self.blocks if b.dynamic and var in b.deps]


class RandomDesign:
    """Random-effects design of a mixed submodel (never scaled).

    Random-design variables are required to be complete, so the matrix is
    static and shared across chains.
    """

    def __init__(self, graph: ModelGraph, sm: SubModel):
        self.graph = graph
        self.sm = sm
        terms: list = []
        names: list = []
        if sm.random_intercept:
            terms.append(None)
            names.append(INTERCEPT_NAME)
        raw = raw_values(graph)
        n = graph.ds.n_rows
        cols = [np.ones((n, 1))] if sm.random_intercept else []
        rows = np.arange(n)
        for term in sm.random_terms:
            for factor in term.factors:
                if isinstance(factor, Variable) and graph.metas[factor.name].is_categorical:
                    raise ConfigError(
                        f"categorical variable {factor.name!r} is not supported "
                        "in the random-effects design"
                    )
            vals = np.ones(n)
            for factor in term.factors:
                vals = vals * evaluate_numeric(factor, raw, rows)
            cols.append(vals[:, None])
            names.append(term.name)
        if not cols:
            raise ConfigError(
                f"the random-effects part of {sm.response!r} has no terms"
            )
        self.matrix = np.hstack(cols)
        self.names = tuple(names)
        self.n_effects = self.matrix.shape[1]

    def for_group(self, g: int) -> np.ndarray:
        return self.matrix[self.graph.gi.rows_of(g), :]


def raw_values(graph: ModelGraph) -> dict:
    """Data-scale value arrays: NaN for missing cells, category codes with
    0 replaced by NaN for categorical variables."""
    out = {}
    for name in graph.ds.names:
        col = graph.ds[name]
        if name in graph.codes:
            vals = graph.codes[name].copy()
            vals[vals == 0] = np.nan
        else:
            vals = col.values.copy()
            vals[col.missing] = np.nan
        out[name] = vals
    return out


def _term_deps(term: Term) -> set:
    from .formulas import term_dependencies

    return term_dependencies(term)


# ---------------------------------------------------------------------------
# Backtransformation of coefficients to the data scale


def backtransform_coefs(design: SubModelDesign, beta_scaled: np.ndarray) -> np.ndarray:
    """Coefficients on the data scale from coefficients on the scaled design.

    Every scaled column j contributes its slope divided by the column sd; the
    intercept absorbs the shifts; a scaled response multiplies slopes and
    intercept by its sd and shifts the intercept by its mean.
    """
    beta = np.asarray(beta_scaled, dtype=float).copy()
    shift = 0.0
    for j, st in enumerate(design.scale):
        if st is None:
            continue
        shift += beta[j] * st.mean / st.sd
        beta[j] = beta[j] / st.sd
    beta = beta * design.sd_y
    if design.intercept_col is not None:
        beta[design.intercept_col] = (
            beta_scaled[design.intercept_col] - shift
        ) * design.sd_y + design.mu_y
    return beta


def threshold_shift(design: SubModelDesign, beta_scaled: np.ndarray) -> float:
    """Constant absorbed by ordinal thresholds when unscaling columns.

    With columns scaled as (x-m)/s, the linear predictor picks up the fixed
    offset -sum(beta_j m_j / s_j); the thresholds move by the same amount
    when coefficients are reported on the data scale.
    """
    shift = 0.0
    for j, st in enumerate(design.scale):
        if st is None:
            continue
        shift += beta_scaled[j] * st.mean / st.sd
    return shift
