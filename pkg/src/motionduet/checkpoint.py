"""Checkpoints: named float64 arrays behind a JSON manifest line.

Same container layout as the motion and feature files: one JSON header
line, then a raw little-endian payload.  The manifest lists every tensor
(name and shape) in payload order, so a reader can slice the byte stream
without trusting the writer's process state.  A checkpoint carries the
model parameters, optionally the optimizer state (required to resume
training bit-for-bit), the latent normalizer when one has been fitted,
and an echo of the run configuration for provenance.
"""

from __future__ import annotations

import numpy as np

from . import numkit as nk
from .diffusion import Model, NormStats
from .synthdata import MotionFormatError, _read_container, _write_container

_DTYPE = "<f8"


def save_checkpoint(path, model: Model, opt=None, step: int = 0, config=None) -> None:
    """Write model (and optionally optimizer) state; smallest file that a
    later `load_checkpoint` can restore exactly."""
    arrays: list[tuple[str, np.ndarray]] = [
        (p.name, np.asarray(p.data, dtype=np.float64)) for p in nk.collect_params(model)
    ]
    if opt is not None:
        arrays.extend(
            (name, np.asarray(arr, dtype=np.float64))
            for name, arr in opt.state_arrays().items()
        )
    if model.norm is not None:
        arrays.append(("norm.mean", model.norm.mean))
        arrays.append(("norm.std", model.norm.std))
    names = [n for n, _ in arrays]
    if len(set(names)) != len(names):
        raise ValueError("duplicate tensor names in checkpoint")
    header = {
        "kind": "checkpoint",
        "dtype": _DTYPE,
        "step": int(step),
        "config": config,
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    if arrays:
        payload = np.concatenate([a.ravel() for _, a in arrays])
    else:
        payload = np.zeros(0)
    _write_container(path, header, payload.astype(_DTYPE))


def read_manifest(path) -> dict:
    """Header alone: step, config echo and the tensor listing, without
    touching the model."""
    header, _ = _read_container(path)
    if header.get("kind") != "checkpoint":
        raise MotionFormatError(
            f"{path}: not a checkpoint (kind={header.get('kind')!r})"
        )
    return header


def _split_payload(path, header: dict, payload: bytes) -> dict[str, np.ndarray]:
    entries = header.get("tensors")
    if not isinstance(entries, list):
        raise MotionFormatError(f"{path}: manifest missing 'tensors' list")
    sizes = []
    for e in entries:
        if not isinstance(e, dict) or "name" not in e or "shape" not in e:
            raise MotionFormatError(f"{path}: malformed tensor entry {e!r}")
        sizes.append(int(np.prod([int(s) for s in e["shape"]], dtype=np.int64)))
    expected = sum(sizes) * 8
    if len(payload) != expected:
        raise MotionFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype=_DTYPE)
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for e, size in zip(entries, sizes):
        name = str(e["name"])
        if name in arrays:
            raise MotionFormatError(f"{path}: duplicate tensor {name!r}")
        shape = tuple(int(s) for s in e["shape"])
        # frombuffer views are read-only; copy so params stay writable
        arrays[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return arrays


def load_checkpoint(path, model: Model, opt=None) -> tuple[int, dict]:
    """Restore `model` (and `opt` when given) in place.

    Returns (step, config echo).  Every model parameter must be present
    with its exact shape; optimizer state is required only when an
    optimizer is passed.  The stored normalizer is restored as-is, and
    its absence resets `model.norm` to None.
    """
    header, payload = _read_container(path)
    if header.get("kind") != "checkpoint":
        raise MotionFormatError(
            f"{path}: not a checkpoint (kind={header.get('kind')!r})"
        )
    if header.get("dtype", _DTYPE) != _DTYPE:
        raise MotionFormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    arrays = _split_payload(path, header, payload)

    params = nk.collect_params(model)
    missing = sorted(p.name for p in params if p.name not in arrays)
    if missing:
        raise MotionFormatError(f"{path}: missing parameters: {', '.join(missing)}")
    for p in params:
        arr = arrays.pop(p.name)
        if arr.shape != p.data.shape:
            raise MotionFormatError(
                f"{path}: {p.name}: stored shape {list(arr.shape)} does not match "
                f"model shape {list(p.data.shape)}"
            )
        p.data[...] = arr

    adam_state = {k: arrays.pop(k) for k in sorted(arrays) if k.startswith("adam.")}
    if opt is not None:
        if not adam_state:
            raise MotionFormatError(f"{path}: checkpoint holds no optimizer state")
        try:
            opt.load_state_arrays(adam_state)
        except KeyError as err:
            raise MotionFormatError(
                f"{path}: optimizer state missing {err.args[0]!r}"
            ) from None

    if "norm.mean" in arrays or "norm.std" in arrays:
        try:
            mean = arrays.pop("norm.mean")
            std = arrays.pop("norm.std")
        except KeyError as err:
            raise MotionFormatError(f"{path}: normalizer missing {err.args[0]!r}") from None
        try:
            model.norm = NormStats(mean, std)
        except ValueError as err:
            raise MotionFormatError(f"{path}: bad normalizer: {err}") from None
    else:
        model.norm = None

    if arrays:
        raise MotionFormatError(
            f"{path}: unexpected tensors: {', '.join(sorted(arrays))}"
        )
    config = header.get("config")
    return int(header.get("step", 0)), config if isinstance(config, dict) else {}
