"""
manifest.py

Run manifest persisted next to every output: what was run, with which
configuration and seed, how long it took and what the cache and move
counters looked like. Timings live under their own key so two manifests can
be compared for reproducibility after dropping it.
"""
import os
import json
import time
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from . import __version__
from .errors import InputError

logger = logging.getLogger("independence_patterns")


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    timings: Dict[str, Any] = field(default_factory=dict)
    cache: Dict[str, Any] = field(default_factory=dict)
    counters: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    version: str = __version__
    created: float = field(default_factory=time.time)

    def record_timing(self, total_seconds: float, steps: Optional[int] = None) -> None:
        self.timings["total_seconds"] = total_seconds
        if steps:
            self.timings["seconds_per_step"] = total_seconds / steps

    def reproducible_view(self) -> Dict[str, Any]:
        """Manifest content without wall-clock fields."""
        data = asdict(self)
        data.pop("timings")
        data.pop("created")
        return _drop_timings(data)

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, sort_keys=True, indent=2, default=_jsonable)
        logger.info(f"Manifest saved to {path}")
        return path

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"Cannot read manifest {path}: {e}")
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in known})


def _drop_timings(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _drop_timings(v) for k, v in value.items() if "seconds" not in k}
    if isinstance(value, list):
        return [_drop_timings(v) for v in value]
    return value


def _jsonable(value: Any) -> Any:
    # numpy scalars and arrays
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)
