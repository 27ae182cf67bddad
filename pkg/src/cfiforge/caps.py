"""Resource caps with environment overrides.

Defaults are sized for desk-scale runs.  The CFIFORGE_CAPS environment
variable may hold a JSON object overriding any subset of them, e.g.
``CFIFORGE_CAPS='{"wl_tuples": 5000000}'``.  CLI flags override both.
"""

from __future__ import annotations

import json
import os

from .errors import CapExceeded, InputError

DEFAULTS = {
    # largest allowed q^(deg-1) when building a single vertex gadget
    "gadget_size": 4096,
    # largest universe size for which the preorder is stored as full tuples
    "preorder_universe": 1024,
    # largest number of k-tuples a WL run may allocate
    "wl_tuples": 2_000_000,
    # largest permutation group that may be fully enumerated
    "group_enum": 1_000_000,
    # largest number of cells in an explicitly built 0/1 matrix
    "matrix_cells": 4_000_000,
}

ENV_VAR = "CFIFORGE_CAPS"


def load_caps(overrides: dict | None = None) -> dict:
    """Return the effective cap table: defaults, then env, then overrides."""
    caps = dict(DEFAULTS)
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputError(f"{ENV_VAR} is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise InputError(f"{ENV_VAR} must hold a JSON object")
        for key, value in parsed.items():
            if key not in caps:
                raise InputError(f"unknown cap {key!r} in {ENV_VAR}")
            caps[key] = int(value)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in caps:
                raise InputError(f"unknown cap {key!r}")
            caps[key] = int(value)
    return caps


def check_cap(name: str, needed: int, caps: dict | None = None) -> None:
    """Raise CapExceeded when *needed* exceeds the configured cap *name*."""
    table = caps if caps is not None else load_caps()
    limit = table[name]
    if needed > limit:
        raise CapExceeded(
            f"{name} cap exceeded: need {needed}, limit {limit} "
            f"(override via {ENV_VAR} or a CLI flag)"
        )
