import re
import unicodedata
from typing import Optional

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def slugify(text: Optional[str], fallback: Optional[str] = None) -> str:
    """Create a filesystem-friendly slug from a string.

    - Normalize unicode and strip accents
    - Lowercase
    - Replace non-alphanumeric with hyphens
    - Collapse multiple hyphens and trim
    """
    if not text or not isinstance(text, str):
        return (fallback or "").strip().lower()
    norm = unicodedata.normalize("NFKD", text)
    norm = "".join(c for c in norm if not unicodedata.combining(c))
    norm = norm.lower()
    norm = re.sub(r"[^a-z0-9]+", "-", norm)
    norm = re.sub(r"-+", "-", norm).strip("-")
    if not norm and fallback:
        return fallback.strip().lower()
    return norm


def split_camel_case(name: str) -> list:
    return [part for part in _CAMEL_BOUNDARY.split(name) if part]


def normalize_name(name: str) -> str:
    """Lexical key used for near-miss term matching.

    ``hasAuthor``, ``has_author`` and ``Has-Author`` all map to ``hasauthor``.
    """
    words = []
    for chunk in re.split(r"[-_\s]+", name.strip()):
        words.extend(split_camel_case(chunk))
    return "".join(w.lower() for w in words)
