"""Two-file checkpoints: JSON manifest plus raw little-endian payload.

The manifest lists every tensor (name, shape, dtype code, byte offset into
the payload) alongside the model config and optional training state, so a
checkpoint can be inspected with nothing but a JSON reader.  Payload bytes
are written in manifest order with no padding; loading is exact, so
save -> load -> forward is bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

SCHEMA_VERSION = 1
_DTYPE_CODES = {"f32-le": np.dtype("<f4"), "f64-le": np.dtype("<f8")}
_CODES_BY_KIND = {np.dtype(np.float32): "f32-le", np.dtype(np.float64): "f64-le"}


def _stem(path) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p


def save_checkpoint(path, arrays: dict[str, np.ndarray], config: dict,
                    train_state: dict | None = None) -> Path:
    """Write ``<stem>.json`` and ``<stem>.bin``; returns the stem path."""
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _CODES_BY_KIND:
            raise DataError(f"tensor '{name}' has unsupported dtype {arr.dtype}")
        code = _CODES_BY_KIND[arr.dtype]
        raw = arr.astype(_DTYPE_CODES[code], copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code, "offset": offset})
        offset += len(raw)
        chunks.append(raw)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "train_state": train_state,
        "payload_bytes": offset,
        "tensors": entries,
    }
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=1))
    stem.with_suffix(".bin").write_bytes(b"".join(chunks))
    return stem


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a manifest/payload pair back into (manifest, name -> array)."""
    stem = _stem(path)
    mpath, bpath = stem.with_suffix(".json"), stem.with_suffix(".bin")
    if not mpath.exists():
        raise DataError(f"checkpoint manifest not found: {mpath}")
    if not bpath.exists():
        raise DataError(f"checkpoint payload not found: {bpath}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"manifest {mpath} is not valid JSON: {e}") from None
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported checkpoint schema {manifest.get('schema_version')!r}")
    payload = bpath.read_bytes()
    declared = manifest.get("payload_bytes")
    if declared is not None and declared != len(payload):
        raise DataError(f"payload is {len(payload)} bytes, manifest declares {declared}")
    arrays = {}
    for entry in manifest["tensors"]:
        code = entry["dtype"]
        if code not in _DTYPE_CODES:
            raise DataError(f"tensor '{entry['name']}' has unknown dtype code '{code}'")
        dt = _DTYPE_CODES[code]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        end = start + count * dt.itemsize
        if end > len(payload):
            raise DataError(f"tensor '{entry['name']}' overruns payload ({end} > {len(payload)})")
        arrays[entry["name"]] = np.frombuffer(payload[start:end], dtype=dt).reshape(shape).copy()
    return manifest, arrays


# -- model-level helpers -----------------------------------------------------

OPTIM_PREFIX = "optim."


def save_model(model, path, train_state: dict | None = None,
               optim_arrays: dict[str, np.ndarray] | None = None) -> Path:
    from .model import config_to_dict

    arrays = {name: t.data for name, t in model.store.items()}
    if optim_arrays:
        for name, arr in optim_arrays.items():
            arrays[OPTIM_PREFIX + name] = arr
    return save_checkpoint(path, arrays, config_to_dict(model.config), train_state)


def load_model(path, dtype=None):
    """Rebuild the model a checkpoint was saved from.

    Returns (model, manifest, arrays); ``arrays`` still holds optimizer
    entries so training can resume.  Inference only needs the model.
    """
    from .model import RestorationModel, config_from_dict

    manifest, arrays = load_checkpoint(path)
    config = config_from_dict(manifest["config"])
    params = {n: a for n, a in arrays.items() if not n.startswith(OPTIM_PREFIX)}
    if dtype is None:
        dtype = params[next(iter(params))].dtype if params else np.float32
    model = RestorationModel(config, dtype=dtype)
    model.store.load_arrays(params)
    return model, manifest, arrays
