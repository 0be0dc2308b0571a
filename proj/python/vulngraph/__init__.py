"""Python bindings for the vulngraph C++ core.

Configs are plain dicts shaped like the CLI's JSON config; graphs, models and
predictions come straight from the extension module.
"""

import json

from . import _core
from ._core import (
    DomainError,
    Graph,
    InputError,
    Model,
    appnp_propagate,
    bce_loss,
    keep_count,
    normalize_adjacency,
    score_nodes,
    select_topk,
)

__all__ = [
    "DomainError",
    "Graph",
    "InputError",
    "Model",
    "appnp_propagate",
    "bce_loss",
    "compute_metrics",
    "default_config",
    "evaluate",
    "init_model",
    "keep_count",
    "load_corpus",
    "normalize_adjacency",
    "resolve_config",
    "run_cli",
    "score_nodes",
    "select_topk",
    "simplify",
    "synth_corpus",
    "train",
]


def default_config():
    return json.loads(_core.default_config())


def _merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def resolve_config(overrides=None):
    """Defaults merged with `overrides`, validated and resolved."""
    cfg = _merge(default_config(), overrides or {})
    return json.loads(_core.resolve_config(json.dumps(cfg)))


def _text(config):
    return json.dumps(resolve_config(config))


def synth_corpus(config=None):
    return _core.synth_corpus(_text(config))


def load_corpus(path, config=None):
    return _core.load_corpus(str(path), _text(config))


def init_model(config=None, seed=None):
    cfg = resolve_config(config)
    return Model.init(json.dumps(cfg), cfg["seeds"]["model"] if seed is None else seed)


def train(model, train_set, val_set, config=None):
    """Returns (best_model, best_step, best_val_f1, history_csv)."""
    return _core.train(model, list(train_set), list(val_set), _text(config))


def evaluate(model, graphs, threshold=0.5, jobs=1):
    metrics, predictions = model.evaluate(list(graphs), threshold, jobs)
    return json.loads(metrics), predictions


def simplify(model, graph):
    out, trace = model.simplify(graph)
    return out, json.loads(trace)


def compute_metrics(probs, labels, threshold=0.5):
    return json.loads(_core.compute_metrics(list(probs), list(labels), threshold))


def run_cli(*args):
    """Runs the command-line tool in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
