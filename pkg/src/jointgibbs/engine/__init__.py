"""Gibbs engine: compiled model state, update kernels, and the runner."""

from .runner import run_mcmc
from .state import CompiledModel, McmcSamples, McmcSettings, compile_model

__all__ = ["run_mcmc", "McmcSettings", "McmcSamples", "CompiledModel", "compile_model"]
