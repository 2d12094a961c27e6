"""Sweep orchestration: one Gibbs cycle per iteration, chains scheduled on a
thread pool with independent seed streams."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import ConfigError
from ..models import GAUSSIAN_IDENTITY_TYPES, ModelGraph, SubModel
from . import updates as up
from .state import (ChainState, CompiledModel, McmcSamples, McmcSettings,
                    compile_model, init_chain, monitored_columns)


def run_mcmc(graph: ModelGraph, n_iter: int, *, n_adapt: int = 100,
             n_chains: int = 3, thin: int = 1, seed: int | None = None,
             inits=None, n_threads: int | None = None) -> McmcSamples:
    """Draw posterior samples for a joint model.

    Every chain runs ``n_adapt`` adaptation sweeps (discarded, used to tune
    the Metropolis steps) followed by ``n_iter`` sampling sweeps of which
    every ``thin``-th is kept.  Chains use independent child streams of one
    seed sequence, so results do not depend on how chains are scheduled.
    """
    settings = McmcSettings(n_iter=n_iter, n_adapt=n_adapt, n_chains=n_chains,
                            thin=thin, seed=seed, inits=inits)
    return run_chains(compile_model(graph), settings, n_threads=n_threads)


def run_chains(model: CompiledModel, settings: McmcSettings,
               n_threads: int | None = None) -> McmcSamples:
    graph = model.graph
    keep = monitored_columns(model)
    chain_inits = _per_chain_inits(settings)
    children = np.random.SeedSequence(settings.seed).spawn(settings.n_chains)
    workers = _resolve_threads(n_threads, settings.n_chains)

    if workers <= 1:
        results = [_run_chain(model, settings, keep, child, ci)
                   for child, ci in zip(children, chain_inits)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chain, model, settings, keep, child, ci)
                       for child, ci in zip(children, chain_inits)]
            results = [f.result() for f in futures]

    warnings = list(graph.warnings)
    for k, (_, chain_warnings) in enumerate(results):
        warnings.extend(f"chain {k + 1}: {msg}" for msg in chain_warnings)
    names = tuple(model.node_names[i] for i in keep)
    return McmcSamples(node_names=names, chains=[r[0] for r in results],
                       iterations=settings.iteration_labels(),
                       settings=settings, graph=graph, model=model,
                       warnings=warnings)


def _per_chain_inits(settings: McmcSettings) -> list:
    inits = settings.inits
    if inits is None:
        return [None] * settings.n_chains
    if isinstance(inits, dict):
        return [inits] * settings.n_chains
    if isinstance(inits, (list, tuple)):
        if len(inits) != settings.n_chains:
            raise ConfigError(
                f"need one initial-value dict per chain "
                f"({settings.n_chains}), got {len(inits)}"
            )
        return list(inits)
    raise ConfigError("initial values must be a dict or a list of dicts")


def _resolve_threads(n_threads, n_chains: int) -> int:
    if n_threads is None:
        env = os.environ.get("JOINTGIBBS_THREADS")
        n_threads = int(env) if env else 1
    return max(1, min(int(n_threads), n_chains))


def _run_chain(model: CompiledModel, settings: McmcSettings, keep: np.ndarray,
               seed_child, user_inits):
    rng = np.random.default_rng(seed_child)
    state = init_chain(model, rng, user_inits)
    out = np.empty((settings.n_stored, keep.size))
    total = settings.n_adapt + settings.n_iter
    stored = 0
    for sweep in range(1, total + 1):
        adapting = sweep <= settings.n_adapt
        _one_sweep(model, state, sweep, adapting)
        if sweep == settings.n_adapt:
            _check_acceptance(state)
        if not adapting and (sweep - settings.n_adapt) % settings.thin == 0:
            out[stored] = _collect_row(model, state)[keep]
            stored += 1
    return out, state.warnings


def _collect_row(model: CompiledModel, state: ChainState) -> np.ndarray:
    row = np.empty(len(model.node_names))
    for sl, fn in model.collectors:
        row[sl] = fn(state)
    return row


def _one_sweep(model: CompiledModel, state: ChainState, sweep: int,
               adapting: bool) -> None:
    graph = model.graph

    # 1. coefficients and family parameters, analysis model first, then the
    #    covariate models in their conditioning order
    for sm in graph.submodels:
        _update_params(model, sm, state, sweep, adapting)

    # 2. missing values: the analysis response by an exact likelihood draw,
    #    covariates by their full conditionals in conditioning order
    if model.missing:
        for sm in graph.submodels:
            up.refresh_eta(model, sm, state)
        for info in model.missing:
            if info.var == graph.analysis.response:
                up.update_missing_response(model, graph.analysis, state, info)
            elif graph.metas[info.var].is_categorical:
                up.update_missing_categorical(model, state, info)
            else:
                up.update_missing_continuous(model, state, info, sweep, adapting)

    # 3. random effects and their covariance parameters
    for sm in graph.submodels:
        if not sm.mixed:
            continue
        if sm.model_type in GAUSSIAN_IDENTITY_TYPES:
            up.update_lmm_ranef(model, sm, state)
        else:
            up.update_glmm_ranef(model, sm, state, sweep, adapting)
        up.update_ranef_covariance(model, sm, state)


def _update_params(model: CompiledModel, sm: SubModel, state: ChainState,
                   sweep: int, adapting: bool) -> None:
    conjugate = (sm.model_type in GAUSSIAN_IDENTITY_TYPES
                 or sm.model_type == "lognorm")
    if conjugate:
        up.update_conjugate_coefs(model, sm, state)
    else:
        up.update_coefs_mh(model, sm, state, sweep, adapting)
    if sm.model_type == "clm":
        up.update_clm_thresholds(model, sm, state, sweep, adapting)
    if sm.model_type == "survreg":
        up.update_weibull_shape(model, sm, state, sweep, adapting)
    if sm.has_tau:
        if sm.family in ("gamma", "beta"):
            up.update_tau_mh(model, sm, state, sweep, adapting)
        else:
            up.update_conjugate_tau(model, sm, state)
    if sm.shrinkage:
        up.update_ridge_tau(model, sm, state)


def _check_acceptance(state: ChainState) -> None:
    """After the adaptation phase: flag kernels whose recent acceptance rate
    is far from its target."""
    for key, ad in state.adapt.items():
        if not ad.history:
            continue
        rates = np.mean(np.stack([np.atleast_1d(h) for h in ad.history]), axis=0)
        if rates.size == 0:
            continue
        bad = (rates < 0.1) | (rates > 0.7)
        if np.any(bad):
            state.warnings.append(
                f"acceptance rate of {key} is outside [0.1, 0.7] after "
                f"adaptation ({int(np.sum(bad))} of {rates.size} proposal(s); "
                f"mean rate {float(np.mean(rates)):.2f}); consider increasing "
                "the adaptation phase"
            )
