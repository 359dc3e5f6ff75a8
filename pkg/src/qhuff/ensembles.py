"""Ensemble files and the built-in example sources."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .qmath import Ensemble, EnsembleError

BUILTIN = ("e1", "e2", "which_length", "plus_minus")


class EnsembleFileError(ValueError):
    pass


def ensemble_from_dict(data: dict) -> Ensemble:
    """Parse ``{"dim": d, "signals": [{"prob": p, "amplitudes": [[re, im], ...]}, ...]}``."""
    try:
        dim = int(data["dim"])
        signals = data["signals"]
        states, probs = [], []
        for sig in signals:
            amps = np.array([complex(float(re), float(im)) for re, im in sig["amplitudes"]])
            if len(amps) != dim:
                raise EnsembleFileError(f"signal has {len(amps)} amplitudes, expected {dim}")
            states.append(amps)
            probs.append(float(sig["prob"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, EnsembleFileError):
            raise
        raise EnsembleFileError(f"malformed ensemble file: {exc}") from exc
    try:
        return Ensemble(tuple(states), tuple(probs))
    except EnsembleError as exc:
        raise EnsembleFileError(str(exc)) from exc


def ensemble_to_dict(e: Ensemble) -> dict:
    return {
        "dim": e.dim,
        "signals": [
            {"prob": q, "amplitudes": [[float(a.real), float(a.imag)] for a in u]}
            for u, q in zip(e.states, e.probs)
        ],
    }


def load_ensemble(path) -> Ensemble:
    """Read an ensemble file; ``builtin:NAME`` selects a packaged example."""
    path = str(path)
    if path.startswith("builtin:"):
        return builtin(path.split(":", 1)[1])
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise EnsembleFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnsembleFileError(f"{path} is not valid JSON: {exc}") from exc
    return ensemble_from_dict(data)


def builtin(name: str) -> Ensemble:
    if name not in BUILTIN:
        raise EnsembleFileError(f"unknown built-in ensemble {name!r}; choose from {', '.join(BUILTIN)}")
    text = resources.files("qhuff").joinpath("data", f"{name}.json").read_text()
    return ensemble_from_dict(json.loads(text))


def _make_builtins() -> dict:
    """Definitions used to generate the packaged JSON files."""
    r = 1 / math.sqrt(2)
    return {
        "e1": Ensemble((np.array([1, 0]), np.array([r, r])), (0.5, 0.5)),
        "e2": Ensemble(tuple(np.eye(4)), (0.5, 0.25, 0.125, 0.125)),
        "which_length": Ensemble((np.array([1, 0, 0, 0]), np.array([0, r, r, 0]), np.array([0, r, -r, 0])),
                                 (1 / 3, 1 / 3, 1 / 3)),
        "plus_minus": Ensemble((np.array([r, r]), np.array([r, -r])), (0.5, 0.5)),
    }


def write_builtins(directory) -> None:
    directory = Path(directory)
    for name, e in _make_builtins().items():
        (directory / f"{name}.json").write_text(json.dumps(ensemble_to_dict(e), indent=2) + "\n")
