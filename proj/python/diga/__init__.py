"""Python bindings for the diga market simulator."""

from ._diga import (
    ConfigError,
    Exchange,
    InputError,
    Model,
    NumericalError,
    autocorr,
    config_json,
    demand,
    facts,
    generate_day,
    indicators,
    kl_divergence,
    read_corpus,
    solve_lowest_price,
    synth_corpus,
)

__all__ = [
    "ConfigError",
    "Exchange",
    "InputError",
    "Model",
    "NumericalError",
    "autocorr",
    "config_json",
    "demand",
    "facts",
    "generate_day",
    "indicators",
    "kl_divergence",
    "read_corpus",
    "solve_lowest_price",
    "synth_corpus",
]
