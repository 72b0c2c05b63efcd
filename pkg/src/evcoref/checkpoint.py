"""Self-describing checkpoint archive: parameters, optimizer state, config.

Layout: magic ``EVCK``, u32 version, u32 header length, JSON header
(UTF-8), then the listed tensors as raw little-endian float64 in header
order. The header carries the model config, the type inventory, the
training config, and optimizer scalars, so a checkpoint reloads without
any external context.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .corpus import TypeInventory
from .model import CorefModel, ModelConfig
from .nn import Adamax
from .training import TrainConfig

MAGIC = b"EVCK"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint or one inconsistent with its surroundings."""


def save_checkpoint(path, model: CorefModel, optimizer: Adamax,
                    train_config: TrainConfig) -> None:
    params = model.parameters()
    tensors: list[tuple[str, np.ndarray]] = []
    for p in params:
        tensors.append((f"param/{p.name}", p.data))
    for p in params:
        tensors.append((f"opt_m/{p.name}", optimizer.m[p.name]))
        tensors.append((f"opt_u/{p.name}", optimizer.u[p.name]))
    header = {
        "version": VERSION,
        "model_config": dataclasses.asdict(model.config),
        "types": list(model.inventory.types),
        "train_config": dataclasses.asdict(train_config),
        "optimizer": {"t": optimizer.t, "lr": optimizer.lr,
                      "beta1": optimizer.beta1, "beta2": optimizer.beta2,
                      "eps": optimizer.eps},
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[CorefModel, Adamax, TrainConfig]:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < 12 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path}: corrupt header: {err}") from None

    try:
        model_config = ModelConfig(**header["model_config"])
        inventory = TypeInventory(tuple(header["types"]))
        train_config = TrainConfig(**header["train_config"])
        opt_meta = header["optimizer"]
        tensor_meta = header["tensors"]
    except (KeyError, TypeError) as err:
        raise CheckpointError(f"{path}: incomplete header: {err}") from None

    offset = 12 + header_len
    arrays: dict[str, np.ndarray] = {}
    for meta in tensor_meta:
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = raw[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated tensor {meta['name']!r}")
        arrays[meta["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes

    model = CorefModel(model_config, inventory, init="zeros")
    optimizer = Adamax(model.parameters(), lr=opt_meta["lr"],
                       beta1=opt_meta["beta1"], beta2=opt_meta["beta2"],
                       eps=opt_meta["eps"])
    optimizer.t = int(opt_meta["t"])
    try:
        for p in model.parameters():
            p.data[...] = arrays[f"param/{p.name}"]
            optimizer.m[p.name][...] = arrays[f"opt_m/{p.name}"]
            optimizer.u[p.name][...] = arrays[f"opt_u/{p.name}"]
    except KeyError as err:
        raise CheckpointError(f"{path}: missing tensor {err}") from None
    return model, optimizer, train_config
