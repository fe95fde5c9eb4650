"""Portable binary weight files.

Layout (all little-endian): magic ``AQMD``, format version u16, window
geometry, channel metric ids, architecture widths, provenance string,
normalizer, named weight tensors with shape headers and float64 row-major
payloads, then a trailing CRC-32 of every prior byte.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from ..metrics import MetricKind
from .network import PARAM_NAMES, WEIGHT_FORMAT_VERSION, CnnModel, ShapeError
from .windows import Normalizer, WindowSpec

MAGIC = b"AQMD"


class IntegrityError(ValueError):
    pass


class VersionError(ValueError):
    pass


def serialize_model(model: CnnModel) -> bytes:
    spec = model.spec
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", model.format_version)
    out += struct.pack("<IIIH", spec.history_steps, spec.horizon_steps,
                       spec.step_seconds, spec.n_channels)
    out += bytes(int(m) for m in spec.input_metrics)
    out += struct.pack("<B", int(spec.target_metric))
    out += struct.pack("<HHH", model.conv_channels[0], model.conv_channels[1],
                       model.kernel_size)
    provenance = model.trained_on.encode("utf-8")
    out += struct.pack("<H", len(provenance)) + provenance
    for c in range(spec.n_channels):
        out += struct.pack("<dd", model.normalizer.means[c], model.normalizer.stds[c])
    out += struct.pack("<H", len(PARAM_NAMES))
    for name in PARAM_NAMES:
        w = np.ascontiguousarray(model.weights[name], dtype="<f8")
        nb = name.encode("ascii")
        out += struct.pack("<B", len(nb)) + nb
        out += struct.pack("<B", w.ndim)
        for dim in w.shape:
            out += struct.pack("<I", dim)
        out += w.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def save_model(model: CnnModel, path: Union[str, Path]) -> None:
    Path(path).write_bytes(serialize_model(model))


def deserialize_model(blob: bytes) -> CnnModel:
    if len(blob) < 10 or blob[:4] != MAGIC:
        raise IntegrityError("not a model file (bad magic)")
    stored_crc, = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise IntegrityError("checksum mismatch: file corrupt or truncated")

    cur = 4

    def take(fmt: str):
        nonlocal cur
        size = struct.calcsize(fmt)
        if cur + size > len(blob) - 4:
            raise IntegrityError("file shorter than its headers claim")
        vals = struct.unpack_from(fmt, blob, cur)
        cur += size
        return vals

    version, = take("<H")
    if version != WEIGHT_FORMAT_VERSION:
        raise VersionError(f"unsupported weight format version {version}")
    H, h, step, n_channels = take("<IIIH")
    channel_ids = take(f"<{n_channels}B")
    target_id, = take("<B")
    c1, c2, kernel = take("<HHH")
    prov_len, = take("<H")
    provenance = blob[cur:cur + prov_len].decode("utf-8")
    cur += prov_len
    norm = np.array([take("<dd") for _ in range(n_channels)])

    try:
        spec = WindowSpec(
            target_metric=MetricKind.from_id(target_id),
            input_metrics=tuple(MetricKind.from_id(i) for i in channel_ids),
            history_steps=H, horizon_steps=h, step_seconds=step)
    except ValueError as exc:
        raise ShapeError(f"inconsistent window geometry: {exc}") from None

    n_tensors, = take("<H")
    weights: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        name_len, = take("<B")
        name = blob[cur:cur + name_len].decode("ascii")
        cur += name_len
        ndim, = take("<B")
        shape = take(f"<{ndim}I")
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if cur + nbytes > len(blob) - 4:
            raise IntegrityError("tensor payload extends past end of file")
        weights[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=cur
                                      ).reshape(shape).copy()
        cur += nbytes

    normalizer = Normalizer(means=norm[:, 0].copy(), stds=norm[:, 1].copy())
    return CnnModel(spec=spec, normalizer=normalizer, weights=weights,
                    conv_channels=(c1, c2), kernel_size=kernel,
                    format_version=version, trained_on=provenance)


def load_model(path: Union[str, Path]) -> CnnModel:
    return deserialize_model(Path(path).read_bytes())
