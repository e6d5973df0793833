"""Run configuration files (JSON) and config (de)serialization."""

import json
from dataclasses import asdict

from .ensemble import EnsembleConfig
from .errors import ConfigError
from .network import NetworkConfig, PriorSpec
from .optim import OptimizerConfig
from .sampler import SamplerConfig

USAGE_KEYS = (
    "n_members",
    "hidden_layers",
    "activation",
    "epochs",
    "validation_split",
    "lr",
    "weight_decay",
    "patience",
    "warmup_steps",
    "n_samples",
    "n_thinning",
    "desired_energy_var_start",
    "desired_energy_var_end",
)
OPTIONAL_KEYS = {"prior_std": 1.0, "master_seed": 0, "max_workers": "auto"}

_INT_KEYS = {"n_members", "epochs", "patience", "warmup_steps", "n_samples", "n_thinning", "master_seed"}


def validate_params(params):
    """Check a flat parameter mapping; returns a copy with optional keys filled in."""
    if not isinstance(params, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(params) - set(USAGE_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    missing = [k for k in USAGE_KEYS if k not in params]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(missing)}")
    out = {**OPTIONAL_KEYS, **params}
    for key in _INT_KEYS:
        if isinstance(out[key], bool) or not isinstance(out[key], int):
            raise ConfigError(f"{key} must be an integer")
    if not isinstance(out["hidden_layers"], list) or not all(
        isinstance(h, int) and not isinstance(h, bool) for h in out["hidden_layers"]
    ):
        raise ConfigError("hidden_layers must be a list of integers")
    if not 0 <= out["master_seed"] < 2**64:
        raise ConfigError("master_seed must be a 64-bit unsigned integer")
    return out


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            params = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return validate_params(params)


def build_config(params, input_dim, task="regression", n_outputs=1):
    """Turn a validated flat mapping into an :class:`EnsembleConfig`."""
    p = validate_params(params)
    try:
        return EnsembleConfig(
            net=NetworkConfig(input_dim, tuple(p["hidden_layers"]), p["activation"], task, n_outputs),
            opt=OptimizerConfig(
                lr=p["lr"],
                weight_decay=p["weight_decay"],
                epochs=p["epochs"],
                patience=p["patience"],
                validation_split=p["validation_split"],
            ),
            sampler=SamplerConfig(
                warmup_steps=p["warmup_steps"],
                n_samples=p["n_samples"],
                n_thinning=p["n_thinning"],
                desired_energy_var_start=p["desired_energy_var_start"],
                desired_energy_var_end=p["desired_energy_var_end"],
                prior=PriorSpec(p["prior_std"]),
            ),
            n_members=p["n_members"],
            master_seed=p["master_seed"],
            max_workers=p["max_workers"],
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg):
    """Full nested representation, including fields not exposed in config files."""
    return {
        "net": cfg.net.to_dict(),
        "opt": asdict(cfg.opt),
        "sampler": asdict(cfg.sampler),
        "n_members": cfg.n_members,
        "master_seed": cfg.master_seed,
        "max_workers": cfg.max_workers,
    }


def config_from_dict(d):
    s = dict(d["sampler"])
    s["prior"] = PriorSpec(**s["prior"])
    return EnsembleConfig(
        net=NetworkConfig(**d["net"]),
        opt=OptimizerConfig(**d["opt"]),
        sampler=SamplerConfig(**s),
        n_members=d["n_members"],
        master_seed=d["master_seed"],
        max_workers=d["max_workers"],
    )
