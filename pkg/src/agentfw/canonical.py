"""Deterministic JSON serialization and digests.

Everything that ends up in a hash preimage goes through here: sorted keys,
no insignificant whitespace, UTF-8, and numeric values pre-rendered as
fixed-format strings by the caller so float formatting can never vary.
"""

from __future__ import annotations

import hashlib
import json

GENESIS_HASH = "0" * 64


def canonical_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_obj(obj) -> str:
    return sha256_hex(canonical_bytes(obj))


def format_score(value: float) -> str:
    """Scores enter the canonical form as 4-decimal strings."""
    return f"{value:.4f}"
