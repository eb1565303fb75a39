from __future__ import annotations
import hashlib
from typing import Any, Iterable, List, Optional, Sequence

def chunked(seq: Sequence[Any], size: int) -> Iterable[Sequence[Any]]:
    """Yield successive chunks from seq of length <= size."""
    for i in range(0, len(seq), size):
        yield seq[i:i + size]

def parse_int_list(s: Optional[str]) -> List[int]:
    """Parse "1, 5,10" into [1, 5, 10]; tolerates None/empty."""
    if not s:
        return []
    return [int(p.strip()) for p in s.split(",") if p.strip()]

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()

def mean_or_none(values: List[float]) -> Optional[float]:
    """Arithmetic mean, or None for an empty list (absent, not zero)."""
    return sum(values) / len(values) if values else None
