"""Small shared helpers: thread cap, canonical JSON, seed derivation."""

from __future__ import annotations

import json
import os

import numpy as np

THREADS_ENV = "FAIRAUDIT_THREADS"


def thread_cap() -> int:
    """Upper bound on internal parallelism, from FAIRAUDIT_THREADS (default 1).

    Stages may use fewer threads than the cap; results never depend on it.
    """
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def canonical_json(obj) -> str:
    """Stable JSON encoding: sorted keys, compact separators, UTF-8 text."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def derive_seeds(master: int, names: tuple[str, ...]) -> dict[str, int]:
    """Derive one independent child seed per name from a master seed."""
    children = np.random.SeedSequence(master).spawn(len(names))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(names, children)}
