"""JSON configuration files.

A run configuration is one JSON object holding the model keys together with
``target``, and optionally ``controller``, ``adversary`` and
``initial_state``.  An experiment suite lists such configurations::

    {"root_seed": 0, "seeds": 20,
     "configs": [{"config_id": "chain", "config": "chain.json", "steps": 500000,
                  "adversary": {"kind": "best-response"}}]}

``config`` is a path (relative to the suite file) or an inline object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .adversary import adversary_from_dict
from .controller import ControllerParams
from .errors import ModelError
from .game_model import MODEL_KEYS, GameModel
from .geometry import ConvexTarget, target_from_dict
from .harness import ExperimentSpec

RUN_KEYS = frozenset(MODEL_KEYS) | {"target", "controller", "adversary", "initial_state"}
SUITE_KEYS = frozenset({"root_seed", "seeds", "configs"})
ENTRY_KEYS = frozenset({"config_id", "config", "steps", "adversary", "controller", "record_stride"})


@dataclass
class LoadedConfig:
    model: GameModel
    target: ConvexTarget | None
    controller: ControllerParams
    adversary: dict
    initial_state: int = 0


def read_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path} is not valid JSON: {exc}") from exc


def parse_config(doc) -> LoadedConfig:
    if not isinstance(doc, dict):
        raise ModelError("configuration must be a JSON object")
    unknown = set(doc) - RUN_KEYS
    if unknown:
        raise ModelError(f"unknown configuration keys: {sorted(unknown)}")
    model = GameModel.from_dict({k: doc[k] for k in MODEL_KEYS if k in doc})
    target = target_from_dict(doc["target"]) if "target" in doc else None
    if target is not None and target.dim != model.dim:
        raise ModelError(f"target dimension {target.dim} != reward dimension {model.dim}")
    controller = doc.get("controller", {})
    if not isinstance(controller, dict):
        raise ModelError("'controller' must be an object")
    params = ControllerParams.from_dict(controller)
    adversary = doc.get("adversary", {"kind": "uniform-random"})
    if not isinstance(adversary, dict):
        raise ModelError("'adversary' must be an object")
    adversary_from_dict(adversary)  # validate early
    initial_state = doc.get("initial_state", 0)
    if isinstance(initial_state, bool) or not isinstance(initial_state, int):
        raise ModelError("'initial_state' must be an integer")
    if not 0 <= initial_state < model.n_states:
        raise ModelError(f"initial state {initial_state} out of range")
    return LoadedConfig(model, target, params, dict(adversary), initial_state)


def load_config(path) -> LoadedConfig:
    return parse_config(read_json(path))


def _positive_int(doc, key, default=None):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ModelError(f"'{key}' must be a positive integer")
    return value


def load_suite(path) -> tuple[list[ExperimentSpec], int, int]:
    """Experiment specs, seed count and root seed of a suite file."""
    path = Path(path)
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ModelError("suite must be a JSON object")
    unknown = set(doc) - SUITE_KEYS
    if unknown:
        raise ModelError(f"unknown suite keys: {sorted(unknown)}")
    entries = doc.get("configs")
    if not isinstance(entries, list) or not entries:
        raise ModelError("suite needs a nonempty 'configs' list")
    seeds = _positive_int(doc, "seeds", 1)
    root_seed = doc.get("root_seed", 0)
    if isinstance(root_seed, bool) or not isinstance(root_seed, int) or root_seed < 0:
        raise ModelError("'root_seed' must be a nonnegative integer")
    specs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ModelError(f"suite entry {i} must be an object")
        unknown = set(entry) - ENTRY_KEYS
        if unknown:
            raise ModelError(f"unknown keys in suite entry {i}: {sorted(unknown)}")
        source = entry.get("config")
        if isinstance(source, str):
            loaded = load_config(path.parent / source)
        elif isinstance(source, dict):
            loaded = parse_config(source)
        else:
            raise ModelError(f"suite entry {i} needs 'config' (path or object)")
        if loaded.target is None:
            raise ModelError(f"suite entry {i} has no target")
        adversary = entry.get("adversary", loaded.adversary)
        adversary_from_dict(adversary)
        controller = (
            ControllerParams.from_dict(entry["controller"]) if "controller" in entry else loaded.controller
        )
        specs.append(
            ExperimentSpec(
                config_id=str(entry.get("config_id", f"config{i}")),
                model=loaded.model,
                target=loaded.target,
                adversary=dict(adversary),
                horizon=_positive_int(entry, "steps", 100_000),
                controller=controller,
                initial_state=loaded.initial_state,
                record_stride=entry.get("record_stride"),
            )
        )
    return specs, seeds, root_seed
