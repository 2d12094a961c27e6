"""Update kernels: conjugate draws, adaptive Metropolis steps, and the
full-conditional updates of missing values."""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import SamplerError
from ..models import SubModel
from .families import draw_response, linkinv, loglik_rows
from .state import (AdaptiveScalar, ChainState, CompiledModel, MissingInfo,
                    ranef_rows)

GAIN_POWER = 0.6
TARGET_SCALAR = 0.44
TARGET_BLOCK = 0.234
ACCEPT_WINDOW = 50


def _record(adapt, accepted, sweep: int, adapting: bool, target: float) -> None:
    if not adapting:
        return
    gain = sweep ** (-GAIN_POWER)
    if isinstance(adapt, AdaptiveScalar):
        adapt.log_step += gain * (float(accepted) - target)
    else:
        adapt.log_steps += gain * (np.asarray(accepted, dtype=float) - target)
    adapt.history.append(np.asarray(accepted, dtype=float))
    if len(adapt.history) > ACCEPT_WINDOW:
        adapt.history.pop(0)


def _prior_prec_mean(model: CompiledModel, sm: SubModel, p: int, state: ChainState):
    """Per-coefficient prior precision and mean for a coefficient vector."""
    hyper = model.graph.hyper
    if sm.shrinkage:
        tau_beta = state.params[sm.response]["tau_beta"]
        return np.full(p, tau_beta), np.zeros(p)
    fam = hyper.for_family(sm.family)
    return np.full(p, fam.tau_reg), np.full(p, fam.mu_reg)


def _scaled_response(model: CompiledModel, sm: SubModel, state: ChainState) -> np.ndarray:
    design = model.designs[sm.response]
    y = state.values[sm.response][design.rows]
    if sm.model_type == "lognorm":
        return np.log(y)
    return (y - design.mu_y) / design.sd_y


# ---------------------------------------------------------------------------
# Conjugate updates (gaussian-identity and log-normal models)


def update_conjugate_coefs(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    resp = sm.response
    X = state.X[resp]
    tau = state.params[resp]["tau"]
    y = _scaled_response(model, sm, state)
    if sm.mixed:
        y = y - state.eta_ranef[resp]
    p = X.shape[1]
    prior_prec, prior_mean = _prior_prec_mean(model, sm, p, state)
    prec = tau * (X.T @ X)
    prec[np.diag_indices_from(prec)] += prior_prec
    rhs = tau * (X.T @ y) + prior_prec * prior_mean
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, rhs)
    z = state.rng.standard_normal(p)
    beta = mean + np.linalg.solve(chol.T, z)
    state.params[resp]["beta"] = beta
    state.eta[resp] = X @ beta


def update_conjugate_tau(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    resp = sm.response
    fam = model.graph.hyper.for_family(sm.family)
    y = _scaled_response(model, sm, state)
    eta = state.eta[resp]
    if sm.mixed:
        eta = eta + state.eta_ranef[resp]
    mu = eta if sm.model_type == "lognorm" else linkinv(sm.link, eta)
    resid = y - mu
    ssr = float(resid @ resid)
    shape = fam.shape_tau + 0.5 * resid.size
    rate = fam.rate_tau + 0.5 * ssr
    state.params[resp]["tau"] = state.rng.gamma(shape, 1.0 / rate)


def update_ridge_tau(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    beta = state.params[sm.response]["beta"]
    ridge = model.graph.hyper.ridge
    shape = ridge.shape + 0.5 * beta.size
    rate = ridge.rate + 0.5 * float(np.sum(beta * beta))
    state.params[sm.response]["tau_beta"] = state.rng.gamma(shape, 1.0 / rate)


# ---------------------------------------------------------------------------
# Likelihood plumbing for Metropolis updates


def _family_pars(sm: SubModel, state: ChainState) -> dict:
    pr = state.params[sm.response]
    pars = {}
    if "tau" in pr:
        pars["tau"] = pr["tau"]
    if "gamma" in pr:
        pars["gamma"] = pr["gamma"]
    if "shape" in pr:
        pars["shape"] = pr["shape"]
    return pars


def _model_loglik_rows(model: CompiledModel, sm: SubModel, state: ChainState,
                       eta=None, pars=None, rows=None):
    """Per-row log-likelihood of a submodel at the current state, optionally
    with an alternative linear predictor or parameter set.

    Gaussian responses are mapped onto the standardized scale the chain works
    on; the constant Jacobian cancels from every acceptance ratio."""
    design = model.designs[sm.response]
    y = model.response_values(sm, state.values)
    if sm.survival is None:
        y = y[design.rows] if rows is None else y[design.rows[rows]]
        if sm.family == "gaussian":
            y = (y - design.mu_y) / design.sd_y
    elif rows is not None:
        y = (y[0][rows], y[1][rows])
    if eta is None:
        eta = state.eta[sm.response]
        if sm.mixed:
            eta = eta + state.eta_ranef[sm.response]
        if rows is not None:
            eta = eta[rows]
    if pars is None:
        pars = _family_pars(sm, state)
    return loglik_rows(sm.model_type, y, eta, pars)


def _loglik_sum(model: CompiledModel, sm: SubModel, state: ChainState,
                eta=None, pars=None) -> float:
    return float(np.sum(_model_loglik_rows(model, sm, state, eta=eta, pars=pars)))


# ---------------------------------------------------------------------------
# Metropolis updates for coefficients and family parameters


def update_coefs_mh(model: CompiledModel, sm: SubModel, state: ChainState,
                    sweep: int, adapting: bool) -> None:
    resp = sm.response
    X = state.X[resp]
    pr = state.params[resp]
    adapt = state.adapt[f"coef:{resp}"]
    rng = state.rng

    if sm.model_type == "mlogit":
        beta = pr["beta"]
        km1, pcols = beta.shape
        steps = adapt.steps.reshape(beta.shape)
        accepted = np.zeros(beta.shape)
        cur_ll = _loglik_sum(model, sm, state)
        hyper = model.graph.hyper.for_family(sm.family)
        prior_prec, prior_mean = (np.full(beta.shape, hyper.tau_reg),
                                  np.full(beta.shape, hyper.mu_reg))
        if sm.shrinkage:
            prior_prec = np.full(beta.shape, pr["tau_beta"])
            prior_mean = np.zeros(beta.shape)
        for k in range(km1):
            for j in range(pcols):
                delta = steps[k, j] * rng.standard_normal()
                new = beta[k, j] + delta
                eta_new = state.eta[resp].copy()
                eta_new[:, k] += delta if j == 0 else X[:, j - 1] * delta
                new_ll = _loglik_sum(model, sm, state, eta=eta_new)
                if not np.isfinite(cur_ll):
                    raise SamplerError(
                        f"log-density of {resp!r} coefficients is not finite"
                    )
                logr = (new_ll - cur_ll
                        - 0.5 * prior_prec[k, j] * ((new - prior_mean[k, j]) ** 2
                                                    - (beta[k, j] - prior_mean[k, j]) ** 2))
                if np.log(rng.random()) < logr:
                    beta[k, j] = new
                    state.eta[resp] = eta_new
                    cur_ll = new_ll
                    accepted[k, j] = 1.0
        _record(adapt, accepted.ravel(), sweep, adapting, TARGET_SCALAR)
        return

    beta = pr["beta"]
    p = beta.size
    prior_prec, prior_mean = _prior_prec_mean(model, sm, p, state)
    steps = adapt.steps
    accepted = np.zeros(p)
    offset = state.eta_ranef[resp] if sm.mixed else 0.0
    fixed = state.eta[resp]
    cur_ll = _loglik_sum(model, sm, state)
    for j in range(p):
        delta = steps[j] * rng.standard_normal()
        new = beta[j] + delta
        fixed_new = fixed + X[:, j] * delta
        if not np.isfinite(cur_ll):
            raise SamplerError(f"log-density of {resp!r} coefficients is not finite")
        new_ll = _loglik_sum(model, sm, state, eta=fixed_new + offset)
        logr = (new_ll - cur_ll
                - 0.5 * prior_prec[j] * ((new - prior_mean[j]) ** 2
                                         - (beta[j] - prior_mean[j]) ** 2))
        if np.log(rng.random()) < logr:
            beta[j] = new
            fixed = fixed_new
            state.eta[resp] = fixed_new
            cur_ll = new_ll
            accepted[j] = 1.0
    _record(adapt, accepted, sweep, adapting, TARGET_SCALAR)


def update_clm_thresholds(model: CompiledModel, sm: SubModel, state: ChainState,
                          sweep: int, adapting: bool) -> None:
    """Joint parametrization: first threshold plus log-increments, each with
    its own adaptive step; the prior is normal on every element."""
    resp = sm.response
    pr = state.params[resp]
    hyper = model.graph.hyper.for_family(sm.family)
    adapt = state.adapt[f"thresh:{resp}"]
    rng = state.rng
    kk = pr["gamma"].size  # K-1 thresholds; parameters: gamma_1, delta_1..K-2
    params_vec = np.concatenate([[pr["gamma"][0]], pr["delta"]])
    steps = adapt.steps
    accepted = np.zeros(kk)
    cur_ll = _loglik_sum(model, sm, state)
    prior_mu, prior_tau = hyper.mu_delta, hyper.tau_delta
    for j in range(kk):
        delta = steps[j] * rng.standard_normal()
        cand = params_vec.copy()
        cand[j] += delta
        gammas = np.empty(kk)
        gammas[0] = cand[0]
        for k in range(1, kk):
            gammas[k] = gammas[k - 1] + np.exp(cand[k])
        if not np.isfinite(cur_ll):
            raise SamplerError(f"log-density of thresholds for {resp!r} is not finite")
        new_ll = _loglik_sum(model, sm, state, pars={"gamma": gammas})
        logr = (new_ll - cur_ll
                - 0.5 * prior_tau * ((cand[j] - prior_mu) ** 2
                                     - (params_vec[j] - prior_mu) ** 2))
        if np.log(rng.random()) < logr:
            params_vec = cand
            pr["gamma"] = gammas
            pr["delta"] = cand[1:].copy()
            cur_ll = new_ll
            accepted[j] = 1.0
    _record(adapt, accepted, sweep, adapting, TARGET_SCALAR)


def update_tau_mh(model: CompiledModel, sm: SubModel, state: ChainState,
                  sweep: int, adapting: bool) -> None:
    """Precision of gamma and beta models: random walk on log(tau) with a
    gamma prior."""
    resp = sm.response
    pr = state.params[resp]
    fam = model.graph.hyper.for_family(sm.family)
    adapt = state.adapt[f"tau:{resp}"]
    rng = state.rng
    tau = pr["tau"]
    new_tau = tau * np.exp(adapt.step * rng.standard_normal())
    cur_ll = _loglik_sum(model, sm, state)
    if not np.isfinite(cur_ll):
        raise SamplerError(f"log-density of tau for {resp!r} is not finite")
    new_ll = _loglik_sum(model, sm, state, pars={**_family_pars(sm, state), "tau": new_tau})
    # Gamma(shape, rate) prior plus the log-scale Jacobian
    logr = (new_ll - cur_ll
            + fam.shape_tau * (np.log(new_tau) - np.log(tau))
            - fam.rate_tau * (new_tau - tau))
    accepted = np.log(rng.random()) < logr
    if accepted:
        pr["tau"] = new_tau
    _record(adapt, accepted, sweep, adapting, TARGET_SCALAR)


def update_weibull_shape(model: CompiledModel, sm: SubModel, state: ChainState,
                         sweep: int, adapting: bool) -> None:
    resp = sm.response
    pr = state.params[resp]
    rate = model.graph.hyper.surv.rate_shape_weibull
    adapt = state.adapt[f"shape:{resp}"]
    rng = state.rng
    shape = pr["shape"]
    new_shape = shape * np.exp(adapt.step * rng.standard_normal())
    cur_ll = _loglik_sum(model, sm, state)
    if not np.isfinite(cur_ll):
        raise SamplerError(f"log-density of the Weibull shape for {resp!r} is not finite")
    new_ll = _loglik_sum(model, sm, state, pars={"shape": new_shape})
    # exponential prior with the log-scale Jacobian
    logr = (new_ll - cur_ll - rate * (new_shape - shape)
            + np.log(new_shape) - np.log(shape))
    accepted = np.log(rng.random()) < logr
    if accepted:
        pr["shape"] = new_shape
    _record(adapt, accepted, sweep, adapting, TARGET_SCALAR)


# ---------------------------------------------------------------------------
# Random effects


def update_lmm_ranef(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    """Exact multivariate-normal draw of every group's random effects for
    gaussian-identity mixed models."""
    resp = sm.response
    graph = model.graph
    z = model.zdesigns[resp]
    pr = state.params[resp]
    tau = pr["tau"]
    invD = pr["invD"]
    y = _scaled_response(model, sm, state)
    resid = y - state.eta[resp]
    b = pr["b"]
    rng = state.rng
    for g in range(graph.gi.n_groups):
        rows = graph.gi.rows_of(g)
        Zg = z.matrix[rows, :]
        prec = tau * (Zg.T @ Zg) + invD
        rhs = tau * (Zg.T @ resid[rows])
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, rhs)
        b[g] = mean + np.linalg.solve(chol.T, rng.standard_normal(b.shape[1]))
    state.eta_ranef[resp] = ranef_rows(graph, z, b)


def update_glmm_ranef(model: CompiledModel, sm: SubModel, state: ChainState,
                      sweep: int, adapting: bool) -> None:
    """Per-group random-walk block update for non-gaussian mixed models."""
    resp = sm.response
    graph = model.graph
    z = model.zdesigns[resp]
    pr = state.params[resp]
    invD = pr["invD"]
    b = pr["b"]
    adapt = state.adapt[f"ranef:{resp}"]
    rng = state.rng
    design = model.designs[resp]
    y = state.values[resp][design.rows]
    pars = _family_pars(sm, state)
    accepted = np.zeros(graph.gi.n_groups)
    for g in range(graph.gi.n_groups):
        rows = graph.gi.rows_of(g)
        Zg = z.matrix[rows, :]
        prop = b[g] + adapt.steps[g] * rng.standard_normal(b.shape[1])
        eta_old = state.eta[resp][rows] + state.eta_ranef[resp][rows]
        eta_new = state.eta[resp][rows] + Zg @ prop
        ll_old = float(np.sum(loglik_rows(sm.model_type, y[rows], eta_old, pars)))
        ll_new = float(np.sum(loglik_rows(sm.model_type, y[rows], eta_new, pars)))
        if not np.isfinite(ll_old):
            raise SamplerError(
                f"log-density of random effects for {resp!r} is not finite"
            )
        logr = (ll_new - ll_old
                - 0.5 * (prop @ invD @ prop - b[g] @ invD @ b[g]))
        if np.log(rng.random()) < logr:
            b[g] = prop
            state.eta_ranef[resp][rows] = Zg @ prop
            accepted[g] = 1.0
    _record(adapt, accepted, sweep, adapting, TARGET_BLOCK)


def update_ranef_covariance(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    """Wishart full conditional for the random-effects precision; a gamma
    draw when there is a single random effect."""
    resp = sm.response
    graph = model.graph
    hyper = graph.hyper
    pr = state.params[resp]
    b = pr["b"]
    n_groups, q = b.shape
    rng = state.rng
    if q == 1:
        ssq = float(np.sum(b * b))
        shape = hyper.ranef.shape_diag + 0.5 * n_groups
        rate = hyper.ranef.rate_diag + 0.5 * ssq
        pr["invD"] = np.array([[rng.gamma(shape, 1.0 / rate)]])
        return
    kin = hyper.kinv_d(q)
    scatter = b.T @ b
    R = np.diag(pr["RinvD"])
    df = kin + n_groups
    scale = np.linalg.inv(R + scatter)
    scale = 0.5 * (scale + scale.T)
    pr["invD"] = stats.wishart.rvs(df=df, scale=scale, random_state=rng)
    # diagonal hyperprior on R
    invD = pr["invD"]
    for j in range(q):
        shape = hyper.ranef.shape_diag + 0.5 * kin
        rate = hyper.ranef.rate_diag + 0.5 * invD[j, j]
        pr["RinvD"][j] = rng.gamma(shape, 1.0 / rate)


# ---------------------------------------------------------------------------
# Missing-value updates


def refresh_eta(model: CompiledModel, sm: SubModel, state: ChainState) -> None:
    resp = sm.response
    if sm.model_type == "mlogit":
        beta = state.params[resp]["beta"]
        state.eta[resp] = beta[:, 0][None, :] + state.X[resp] @ beta[:, 1:].T
    else:
        state.eta[resp] = state.X[resp] @ state.params[resp]["beta"]


def update_missing_response(model: CompiledModel, sm: SubModel, state: ChainState,
                            info: MissingInfo) -> None:
    """Missing analysis responses: exact draw from the response family."""
    resp = sm.response
    rows = info.units
    eta = state.eta[resp]
    if sm.mixed:
        eta = eta + state.eta_ranef[resp]
    if sm.model_type == "mlogit":
        eta_rows = eta[rows, :]
    else:
        eta_rows = eta[rows]
    draws = draw_response(sm.model_type, eta_rows, _family_pars(sm, state), state.rng)
    if sm.family == "gaussian":
        design = model.designs[resp]
        draws = design.mu_y + design.sd_y * draws
    state.values[resp][rows] = draws


def _unit_rows(model: CompiledModel, info: MissingInfo):
    if info.level2:
        return [model.graph.gi.rows_of(g) for g in info.units]
    return [None] * info.units.size  # single rows handled vectorized


def _write_cells(model: CompiledModel, info: MissingInfo, values: dict,
                 x: np.ndarray, mask=None) -> None:
    arr = values[info.var]
    if info.level2:
        for i, g in enumerate(info.units):
            if mask is None or mask[i]:
                arr[model.graph.gi.rows_of(g)] = x[i]
    else:
        if mask is None:
            arr[info.units] = x
        else:
            arr[info.units[mask]] = x[mask]


def _cell_values(model: CompiledModel, info: MissingInfo, values: dict) -> np.ndarray:
    arr = values[info.var]
    if info.level2:
        return arr[model.graph.gi.rep_rows[info.units]]
    return arr[info.units]


def _affected_models(model: CompiledModel, info: MissingInfo):
    """Submodels whose likelihood involves the variable: its own model plus
    every model with the variable among its predictors."""
    out = [(model.graph.submodel_for(info.var), model.own_positions(info), True)]
    for sm in model.graph.submodels:
        amap = model.affected.get((info.var, sm.response))
        if amap is not None:
            out.append((sm, amap, False))
    return out


def _cell_loglik(model: CompiledModel, sm: SubModel, state: ChainState,
                 amap, n_cells: int) -> np.ndarray:
    rows_ll = _model_loglik_rows(model, sm, state, rows=amap.positions)
    return np.bincount(amap.cell_of, weights=rows_ll, minlength=n_cells)


def update_missing_continuous(model: CompiledModel, state: ChainState,
                              info: MissingInfo, sweep: int, adapting: bool) -> None:
    """One blocked Metropolis step for every missing cell of one continuous
    variable; cells are conditionally independent given the rest."""
    m = info.units.size
    adapt = state.adapt[f"imp:{info.var}"]
    rng = state.rng
    affected = _affected_models(model, info)

    x_old = _cell_values(model, info, state.values)
    if info.transform == "log":
        z_old = np.log(x_old)
    elif info.transform == "logit":
        z_old = np.log(x_old / (1.0 - x_old))
    else:
        z_old = x_old
    z_new = z_old + adapt.steps * rng.standard_normal(m)
    if info.transform == "log":
        x_new = np.exp(z_new)
        log_jac = z_new - z_old
    elif info.transform == "logit":
        x_new = 1.0 / (1.0 + np.exp(-z_new))
        log_jac = (np.log(x_new) + np.log1p(-x_new)
                   - np.log(x_old) - np.log1p(-x_old))
    else:
        x_new = z_new
        log_jac = np.zeros(m)

    out_of_bounds = (x_new <= info.lower) | (x_new >= info.upper)

    ll_old = np.zeros(m)
    for sm, amap, _ in affected:
        ll_old += _cell_loglik(model, sm, state, amap, m)
    if np.any(~np.isfinite(ll_old)):
        bad = int(np.argmax(~np.isfinite(ll_old)))
        raise SamplerError(
            f"log-density of node {info.node_names[bad]} is not finite "
            "at the current state"
        )

    # propose: write, refresh designs, evaluate
    backups = []
    _write_cells(model, info, state.values, x_new)
    ll_new = np.zeros(m)
    for sm, amap, is_own in affected:
        design = model.designs[sm.response]
        if not is_own:
            cols = np.concatenate(
                [np.arange(b.sl.start, b.sl.stop) for b in design.blocks_for(info.var)]
            )
            X = state.X[sm.response]
            x_backup = X[np.ix_(amap.positions, cols)].copy()
            design.refresh(X, state.values, positions=amap.positions, var=info.var)
            if sm.model_type == "mlogit":
                beta = state.params[sm.response]["beta"]
                eta_backup = state.eta[sm.response][amap.positions, :].copy()
                state.eta[sm.response][amap.positions, :] = (
                    beta[:, 0][None, :] + X[amap.positions, :] @ beta[:, 1:].T
                )
            else:
                eta_backup = state.eta[sm.response][amap.positions].copy()
                state.eta[sm.response][amap.positions] = (
                    X[amap.positions, :] @ state.params[sm.response]["beta"]
                )
            backups.append((sm, amap, cols, x_backup, eta_backup))
        ll_new += _cell_loglik(model, sm, state, amap, m)

    log_ratio = ll_new - ll_old + log_jac
    log_ratio[out_of_bounds] = -np.inf
    accept = np.log(rng.random(m)) < log_ratio

    # roll back rejected cells
    if not np.all(accept):
        _write_cells(model, info, state.values, x_old, mask=~accept)
        for sm, amap, cols, x_backup, eta_backup in backups:
            sel = ~accept[amap.cell_of]
            if not np.any(sel):
                continue
            X = state.X[sm.response]
            X[np.ix_(amap.positions[sel], cols)] = x_backup[sel]
            if sm.model_type == "mlogit":
                state.eta[sm.response][amap.positions[sel], :] = eta_backup[sel]
            else:
                state.eta[sm.response][amap.positions[sel]] = eta_backup[sel]

    _record(adapt, accept, sweep, adapting, TARGET_SCALAR)


def update_missing_categorical(model: CompiledModel, state: ChainState,
                               info: MissingInfo) -> None:
    """Exact draw over categories for every missing cell of a categorical
    variable, recomputing dependent design columns for each candidate."""
    graph = model.graph
    meta = graph.metas[info.var]
    kk = meta.n_categories
    m = info.units.size
    affected = _affected_models(model, info)
    rng = state.rng

    logw = np.empty((m, kk))
    for k in range(1, kk + 1):
        _write_cells(model, info, state.values, np.full(m, float(k)))
        for sm, amap, is_own in affected:
            if not is_own:
                design = model.designs[sm.response]
                X = state.X[sm.response]
                design.refresh(X, state.values, positions=amap.positions, var=info.var)
                if sm.model_type == "mlogit":
                    beta = state.params[sm.response]["beta"]
                    state.eta[sm.response][amap.positions, :] = (
                        beta[:, 0][None, :] + X[amap.positions, :] @ beta[:, 1:].T
                    )
                else:
                    state.eta[sm.response][amap.positions] = (
                        X[amap.positions, :] @ state.params[sm.response]["beta"]
                    )
        total = np.zeros(m)
        for sm, amap, _ in affected:
            total += _cell_loglik(model, sm, state, amap, m)
        logw[:, k - 1] = total

    best = logw.max(axis=1)
    if np.any(~np.isfinite(best)):
        bad = int(np.argmax(~np.isfinite(best)))
        raise SamplerError(
            f"all categories of node {info.node_names[bad]} have zero probability"
        )
    probs = np.exp(logw - best[:, None])
    probs /= probs.sum(axis=1, keepdims=True)
    cum = np.cumsum(probs, axis=1)
    draws = (rng.random(m)[:, None] > cum).sum(axis=1) + 1.0

    _write_cells(model, info, state.values, draws)
    for sm, amap, is_own in affected:
        if is_own:
            continue
        design = model.designs[sm.response]
        X = state.X[sm.response]
        design.refresh(X, state.values, positions=amap.positions, var=info.var)
        if sm.model_type == "mlogit":
            beta = state.params[sm.response]["beta"]
            state.eta[sm.response][amap.positions, :] = (
                beta[:, 0][None, :] + X[amap.positions, :] @ beta[:, 1:].T
            )
        else:
            state.eta[sm.response][amap.positions] = (
                X[amap.positions, :] @ state.params[sm.response]["beta"]
            )
