"""Canonical serialization and hashing.

Every hash in the engine -- event chain links, gate payload digests,
content addresses -- is SHA-256 over the canonical form: key-sorted JSON
with minimal separators, UTF-8 encoded. Hex digests are lowercase.
Bit-exact comparisons elsewhere (replay equality, restart determinism)
also go through this module so there is exactly one serialization.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

ZERO_HASH = "0" * 64


def canonical_json(obj: Any) -> str:
    """Key-sorted, minimal-whitespace JSON. The one true serialization."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest(obj: Any) -> str:
    """SHA-256 of an object's canonical serialization."""
    return sha256_hex(canonical_json(obj))
