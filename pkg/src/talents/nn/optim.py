"""Parameter registry, Adam, gradient clipping, and checkpoint files."""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .core import Tensor, default_dtype

CKPT_MAGIC = b"TLNN"


class CheckpointError(Exception):
    """Raised for malformed or incompatible checkpoint files."""


class ParamStore:
    """Named parameter tensors with gradient slots and Adam moment state."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        tensor = Tensor(value, requires_grad=True)
        self.params[name] = tensor
        self._m[name] = np.zeros_like(tensor.data)
        self._v[name] = np.zeros_like(tensor.data)
        return tensor

    def init(self, name: str, shape, rng, scale: float | None = None
             ) -> Tensor:
        """Gaussian init scaled by 1/sqrt(fan-in) unless overridden."""
        if scale is None:
            fan_in = shape[0] if len(shape) > 1 else max(shape[0], 1)
            if len(shape) == 4:             # conv kernels (O, C, kh, kw)
                fan_in = shape[1] * shape[2] * shape[3]
            scale = 1.0 / np.sqrt(fan_in)
        if len(shape) == 1:
            return self.add(name, np.zeros(shape))
        return self.add(name, rng.standard_normal(shape) * scale)

    def init_group(self, prefix: str, shapes: dict, rng) -> dict:
        return {key: self.init(f"{prefix}.{key}", shape, rng)
                for key, shape in shapes.items()}

    def group(self, prefix: str) -> dict:
        out = {name[len(prefix) + 1:]: tensor
               for name, tensor in self.params.items()
               if name.startswith(prefix + ".")}
        if not out:
            raise KeyError(f"no parameters under {prefix!r}")
        return out

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def n_params(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.grad = None


def clip_global_norm(store: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for tensor in store.params.values():
        if tensor.grad is not None:
            total += float((tensor.grad ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for tensor in store.params.values():
            if tensor.grad is not None:
                tensor.grad = tensor.grad * scale
    return norm


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update; clears gradients afterwards."""
    store.step_count += 1
    t = store.step_count
    for name, tensor in store.params.items():
        grad = tensor.grad
        if grad is None:
            continue
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    store.zero_grad()


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(store: ParamStore, path, extra: dict | None = None
                    ) -> None:
    """Named-tensor container: JSON header + raw buffers + CRC-32."""
    header = {
        "dtype": np.dtype(default_dtype()).name,
        "step_count": store.step_count,
        "extra": extra or {},
        "tensors": [{"name": name, "shape": list(t.shape)}
                    for name, t in store.params.items()],
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [CKPT_MAGIC, struct.pack("<I", len(raw_header)), raw_header]
    for tensor in store.params.values():
        parts.append(np.ascontiguousarray(
            tensor.data, dtype="<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(store: ParamStore, path) -> dict:
    """Load buffers into a store with matching names/shapes; returns the
    header's ``extra`` payload."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CKPT_MAGIC:
        raise CheckpointError("not a checkpoint file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint checksum mismatch")
    (hlen,) = struct.unpack("<I", body[4:8])
    header = json.loads(body[8:8 + hlen].decode("utf-8"))
    off = 8 + hlen
    names = [entry["name"] for entry in header["tensors"]]
    if names != store.names():
        raise CheckpointError("parameter names do not match the store")
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        tensor = store.params[entry["name"]]
        if shape != tensor.shape:
            raise CheckpointError(
                f"shape mismatch for {entry['name']}: file {shape}, "
                f"store {tensor.shape}")
        count = int(np.prod(shape)) if shape else 1
        buf = np.frombuffer(body, dtype="<f8", count=count, offset=off)
        off += count * 8
        tensor.data = buf.reshape(shape).astype(default_dtype())
    store.step_count = header["step_count"]
    return header["extra"]
