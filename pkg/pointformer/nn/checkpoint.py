"""
Parameter checkpoint files.

A checkpoint is a numpy `.npz` archive:

    __format__      "pointformer-checkpoint/1"
    __header__      JSON text: {"architecture": {...}, "dtype": "float32", "seed": 0, ...}
    param/<name>    one array per parameter, dotted names in build order
    buffer/<name>   one array per buffer (norm running statistics)

Loading validates the format string and the architecture against the target model.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np

from pointformer.util.errors import InvalidInput, InvalidState

logger = logging.getLogger(__name__)

FORMAT_VERSION = "pointformer-checkpoint/1"


def save_checkpoint(
    path: str, model, architecture: Dict[str, Any], extra: Optional[Dict[str, Any]] = None
) -> str:
    header: Dict[str, Any] = {"architecture": architecture}
    params = list(model.named_parameters())
    if params:
        header["dtype"] = str(params[0][1].data.dtype)
    header.update(extra or {})

    arrays: Dict[str, np.ndarray] = {
        "__format__": np.array(FORMAT_VERSION),
        "__header__": np.array(json.dumps(header, sort_keys=True)),
    }
    for name, p in params:
        arrays[f"param/{name}"] = p.data
    for name, b in model.named_buffers():
        arrays[f"buffer/{name}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    logger.debug(f"checkpoint written: {path} ({len(params)} parameters)")
    return path


def read_checkpoint(path: str) -> Dict[str, Any]:
    """Returns {"header": dict, "params": {name: array}, "buffers": {name: array}}."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        if "__format__" not in archive.files or str(archive["__format__"]) != FORMAT_VERSION:
            raise InvalidInput(f"{path} is not a {FORMAT_VERSION} file")
        header = json.loads(str(archive["__header__"]))
        params = {f[6:]: archive[f] for f in archive.files if f.startswith("param/")}
        buffers = {f[7:]: archive[f] for f in archive.files if f.startswith("buffer/")}
    return {"header": header, "params": params, "buffers": buffers}


def restore_checkpoint(model, checkpoint: Dict[str, Any], architecture: Dict[str, Any]) -> None:
    """Copy checkpoint values into `model` after checking the architecture matches."""
    saved = checkpoint["header"].get("architecture")
    if saved != architecture:
        diff = sorted(
            k
            for k in set(saved or {}) | set(architecture)
            if (saved or {}).get(k) != architecture.get(k)
        )
        raise InvalidState(f"checkpoint architecture differs from the model in: {', '.join(diff)}")

    own = dict(model.named_parameters())
    stored = checkpoint["params"]
    if set(own) != set(stored):
        missing = sorted(set(own) ^ set(stored))
        raise InvalidState(f"checkpoint parameters do not match the model: {missing[0]} ...")
    for name, p in own.items():
        value = stored[name]
        if value.shape != p.data.shape:
            raise InvalidState(f"{name}: checkpoint shape {value.shape} != model {p.data.shape}")
        p.data[...] = value
        p.grad = None
    for name, value in checkpoint["buffers"].items():
        model.set_buffer(name, value)
