import hashlib
import json
from typing import Any, Mapping

import numpy as np


def keyed_rng(*keys: int) -> np.random.Generator:
    """Random stream keyed by integers, independent of evaluation order."""
    return np.random.default_rng([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])


def canonical_json(data: Mapping[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def digest(data: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
