"""Small shared helpers: hashing, canonical JSON, slugs."""

from __future__ import annotations

import hashlib
import json
import re


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))


def canonical_json(obj: object) -> str:
    """Stable JSON encoding used for fingerprints and cache keys."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint(obj: object) -> str:
    return sha256_text(canonical_json(obj))


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(text: str) -> str:
    """Lowercase filesystem-safe identifier; never empty."""
    slug = _SLUG_RE.sub("-", text.lower()).strip("-")
    return slug or "x"
