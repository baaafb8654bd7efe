"""Small shared helpers."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from any printable parts.

    Keeps per-item randomness (one heading, one fold) independent of
    iteration order while still being a pure function of the master
    seed and the item's identity.
    """
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
