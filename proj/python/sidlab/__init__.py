"""Python front end for the sidlab simulation core."""

import json

from . import _core
from ._core import ConfigError, Error, InsufficientDataError, __version__, preset_names

__all__ = [
    "ConfigError",
    "Error",
    "InsufficientDataError",
    "__version__",
    "preset",
    "preset_names",
    "model_hash",
    "find_lambda",
    "simulate",
    "campaign",
    "w2",
    "elliptic_H",
    "minimize_action",
    "gronwall_extremal",
    "toychain_spread",
    "run",
]


def preset(name):
    """Preset expanded to a dict with model, domain and, when known, predicted_H."""
    return json.loads(_core.preset_config(name))


def _model(model):
    if isinstance(model, str):
        model = preset(model)["model"]
    elif "model" in model:  # a whole run config, e.g. from preset()
        model = model["model"]
    return json.dumps(model)


def _domain(domain):
    if "domain" in domain:
        domain = domain["domain"]
    return json.dumps(domain)


def model_hash(model):
    return _core.model_hash(_model(model))


def find_lambda(model, tol=1e-12, start=None):
    return _core.find_lambda(_model(model), tol, start)


def simulate(model, dt=1e-3, horizon=1.0, particles=256, seed=0, record_stride=0):
    """Returns (times, states) with one (particles, dim) array per recorded time."""
    return _core.simulate(_model(model), dt, horizon, particles, seed, record_stride)


def campaign(model, domain, sigma, replicas=300, mode="tagged", dt=1e-3, particles=256, seed=0,
             predicted_H=None, workers=0, allow_coarse_dt=False):
    return _core.campaign(_model(model), _domain(domain), list(sigma), replicas, mode, dt, particles, seed,
                          predicted_H, workers, allow_coarse_dt)


def w2(a, b, method="exact"):
    return _core.w2(a, b, method)


def elliptic_H(model, lambda_, domain):
    return _core.elliptic_H(_model(model), lambda_, _domain(domain))


def minimize_action(model, lambda_, target, nodes=200, T_points=8):
    return _core.minimize_action(_model(model), lambda_, target, nodes, T_points)


def gronwall_extremal(alpha, beta, gamma, kernel="dirac", rate=1.0, f0=1.0, T=10.0, dt=1e-3):
    return _core.gronwall_extremal(alpha, beta, gamma, kernel, rate, f0, T, dt)


def toychain_spread(a, alpha, sigma2, n=10000, centers=(), delta=0.1, seed=0):
    return _core.toychain_spread(a, alpha, list(sigma2), n, list(centers), delta, seed)


def run(command, preset="", overrides=(), seed=None, workers=None, out_dir="sidlab-out", config_path=""):
    """Runs a harness subcommand; returns (written files, log text)."""
    return _core.run(command, preset, list(overrides), seed, workers, out_dir, config_path)
