"""Binary checkpoint files.

Layout (all integers little-endian)::

    magic      8 bytes   b"ADVWBCK\\n"
    version    uint32
    meta_len   uint32
    metadata   meta_len bytes of UTF-8 JSON (sorted keys)
    payload    float64 little-endian values of every tensor listed in metadata
    crc32      uint32 over every preceding byte

The metadata carries the variant, head, loss kind, input shape, layer specs,
seeds, codebook seed/offset and the (name, shape) list of payload tensors.
"""

import json
import struct
import zlib

import numpy as np

from .codebook import Codebook
from .model import Network, layer_from_dict, layer_to_dict

MAGIC = b"ADVWBCK\n"
VERSION = 1


class CheckpointError(Exception):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


def _tensors(network):
    out = []
    for i, p in enumerate(network.params):
        for k in sorted(p):
            out.append((f"layer{i}.{k}", p[k]))
    if network.codebook is not None:
        out.append(("codebook", network.codebook.codewords))
    return out


def to_bytes(network, extra=None):
    tensors = _tensors(network)
    meta = {
        "variant": network.variant,
        "head": network.head,
        "loss_kind": network.loss_kind,
        "n_classes": network.n_classes,
        "input_shape": list(network.input_shape),
        "layers": [layer_to_dict(layer) for layer in network.layers],
        "seeds": {k: int(v) for k, v in network.seeds.items()},
        "codebook": None if network.codebook is None else {
            "seed": network.codebook.seed,
            "stream_offset": network.codebook.stream_offset,
            "events": list(network.codebook.events),
        },
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in tensors],
        "extra": extra or {},
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes]
    body += [np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in tensors]
    blob = b"".join(body)
    return blob + struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)


def from_bytes(blob):
    if len(blob) < len(MAGIC) + 12 or not blob.startswith(MAGIC):
        if MAGIC.startswith(blob[:len(MAGIC)]) and len(blob) < len(MAGIC) + 12:
            raise ChecksumError("checkpoint is truncated")
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, meta_len = struct.unpack_from("<II", blob, len(MAGIC))
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version} (expected {VERSION})")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise ChecksumError("checkpoint checksum mismatch (file truncated or corrupted)")
    pos = len(MAGIC) + 8
    meta = json.loads(blob[pos:pos + meta_len].decode("utf-8"))
    pos += meta_len
    arrays = {}
    for entry in meta["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        arrays[entry["name"]] = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
        pos += 8 * n
    if pos != len(blob) - 4:
        raise ChecksumError("checkpoint payload length does not match its metadata")
    layers = tuple(layer_from_dict(d) for d in meta["layers"])
    params = []
    for i in range(len(layers)):
        params.append({k: arrays[f"layer{i}.{k}"] for k in ("b", "w") if f"layer{i}.{k}" in arrays})
    codebook = None
    if meta["codebook"] is not None:
        cb = meta["codebook"]
        codebook = Codebook(arrays["codebook"], cb["seed"], cb["stream_offset"], tuple(cb["events"]))
    net = Network(layers, params, meta["head"], meta["loss_kind"], tuple(meta["input_shape"]),
                  meta["n_classes"], codebook, meta["variant"], dict(meta["seeds"]))
    return net, meta.get("extra", {})


def save_checkpoint(network, path, extra=None):
    """Write ``network`` (and its codebook, if any) to ``path``."""
    with open(path, "wb") as f:
        f.write(to_bytes(network, extra))


def load_checkpoint(path, with_extra=False):
    """Read a network back; the codebook is available as ``network.codebook``."""
    with open(path, "rb") as f:
        blob = f.read()
    net, extra = from_bytes(blob)
    return (net, extra) if with_extra else net
