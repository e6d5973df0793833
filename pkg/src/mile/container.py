"""Versioned binary model container.

Layout::

    b"BDE1" | uint64 LE metadata length | metadata (canonical JSON, UTF-8)
    | S*d float64 LE payload | 8-byte BLAKE2b digest of all preceding bytes
"""

import hashlib
import json
import struct

import numpy as np

from .config import config_from_dict, config_to_dict
from .data import StandardizationStats
from .ensemble import MemberMeta, PosteriorEnsemble
from .errors import ChecksumError, ContainerError, TruncatedError, VersionError
from .network import NetworkConfig

MAGIC = b"BDE1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sQ")
_DIGEST_SIZE = 8


def _digest(data):
    return hashlib.blake2b(data, digest_size=_DIGEST_SIZE).digest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def to_bytes(ens):
    meta = {
        "format_version": FORMAT_VERSION,
        "seed_scheme": ens.seed_scheme,
        "network": ens.net.to_dict(),
        "ensemble": config_to_dict(ens.config) if ens.config is not None else None,
        "standardization": ens.standardization.to_dict(),
        "members": [m.to_dict() for m in ens.member_meta],
        "labels": list(ens.labels) if ens.labels is not None else None,
        "n_samples": ens.samples.shape[0],
        "n_params": ens.samples.shape[1],
        "extra": ens.extra,
    }
    head = canonical_json(meta).encode("utf-8")
    body = _HEADER.pack(MAGIC, len(head)) + head + ens.samples.astype("<f8").tobytes()
    return body + _digest(body)


def save_model(ens, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(ens))


def from_bytes(blob):
    """Parse a container; checks run magic, metadata, version, size, then checksum."""
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise ContainerError("not a model container (bad magic)")
    _, n_meta = _HEADER.unpack_from(blob)
    end_meta = _HEADER.size + n_meta
    if end_meta > len(blob):
        raise TruncatedError("container truncated inside metadata")
    try:
        meta = json.loads(blob[_HEADER.size:end_meta].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        if len(blob) >= end_meta + _DIGEST_SIZE and _digest(blob[:-_DIGEST_SIZE]) != blob[-_DIGEST_SIZE:]:
            raise ChecksumError("checksum mismatch (metadata corrupted)") from None
        raise ContainerError("unreadable metadata") from None
    version = meta.get("format_version") if isinstance(meta, dict) else None
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported container format version {version!r} (expected {FORMAT_VERSION})")
    S, d = meta["n_samples"], meta["n_params"]
    expected = end_meta + 8 * S * d + _DIGEST_SIZE
    if len(blob) < expected:
        raise TruncatedError(f"container truncated: {len(blob)} bytes, expected {expected}")
    if len(blob) > expected:
        raise ContainerError(f"trailing bytes after container ({len(blob) - expected})")
    if _digest(blob[:-_DIGEST_SIZE]) != blob[-_DIGEST_SIZE:]:
        raise ChecksumError("checksum mismatch")
    samples = np.frombuffer(blob, dtype="<f8", count=S * d, offset=end_meta).reshape(S, d).astype(np.float64)
    return PosteriorEnsemble(
        samples=samples,
        net=NetworkConfig(**meta["network"]),
        standardization=StandardizationStats.from_dict(meta["standardization"]),
        member_meta=tuple(MemberMeta(**m) for m in meta["members"]),
        config=config_from_dict(meta["ensemble"]) if meta["ensemble"] is not None else None,
        labels=tuple(meta["labels"]) if meta["labels"] is not None else None,
        seed_scheme=meta["seed_scheme"],
        extra=meta.get("extra", {}),
    )


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
