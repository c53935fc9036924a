"""Run configuration: one serializable document drives every subcommand.

Seeds for individual replicas are always derived from (master_seed, replica,
check label), never drawn from a shared stream, so a config maps to the same
outputs no matter how work is scheduled or which checks run alongside.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

from .families import PRESET_NAMES, DisplacementLaw, calibrate_law, preset

#: checks the report-data subcommand may bundle
KNOWN_CHECKS = ("theorem21", "corollary22", "prop23", "barrier", "spine")

_SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class RunConfig:
    family: str = "f2"
    law_params: dict = field(default_factory=dict)
    master_seed: int = 0
    replicas: int = 200
    n_grid: tuple[int, ...] = (1_000, 10_000, 100_000, 1_000_000)
    m_grid: tuple[int, ...] = (1_000,)
    gamma: float = 1.5
    eps_grid: tuple[float, ...] = (0.3,)
    lambda_cap: float = math.expm1(3.0)
    arena_cap: int = 1 << 26
    out_dir: str = "out"
    checks: tuple[str, ...] = KNOWN_CHECKS
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.family not in PRESET_NAMES:
            raise ValueError(f"unknown family {self.family!r}; "
                             f"known: {list(PRESET_NAMES)}")
        if not 0 <= self.master_seed < _SEED_LIMIT:
            raise ValueError("master_seed must fit in 64 bits")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        for name, grid, low in (("n_grid", self.n_grid, 2),
                                ("m_grid", self.m_grid, 1)):
            if not grid:
                raise ValueError(f"{name} must be non-empty")
            if list(grid) != sorted(set(grid)):
                raise ValueError(f"{name} must be strictly increasing")
            if grid[0] < low:
                raise ValueError(f"{name} entries must be >= {low}")
        if not self.eps_grid:
            raise ValueError("eps_grid must be non-empty")
        if any(not 0.0 < e <= 1.0 for e in self.eps_grid):
            raise ValueError("eps values must be in (0, 1]")
        if self.gamma >= 2.0:
            raise ValueError("gamma must be < 2")
        if self.lambda_cap <= 0:
            raise ValueError("lambda_cap must be positive")
        if self.arena_cap < 1 << 14:
            raise ValueError("arena_cap must be at least 2^14")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        unknown = set(self.checks) - set(KNOWN_CHECKS)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}; "
                             f"known: {list(KNOWN_CHECKS)}")

    # -- law -----------------------------------------------------------------

    def law(self) -> DisplacementLaw:
        if self.law_params:
            return calibrate_law(self.family, **self.law_params)
        return preset(self.family)

    # -- serialization ---------------------------------------------------------

    def to_doc(self) -> dict:
        doc = asdict(self)
        for key in ("n_grid", "m_grid", "eps_grid", "checks"):
            doc[key] = list(doc[key])
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        kw = dict(doc)
        for key in ("n_grid", "m_grid"):
            if key in kw:
                kw[key] = tuple(int(v) for v in kw[key])
        if "eps_grid" in kw:
            kw["eps_grid"] = tuple(float(v) for v in kw["eps_grid"])
        if "checks" in kw:
            kw["checks"] = tuple(str(v) for v in kw["checks"])
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_doc(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def with_overrides(self, **kw) -> "RunConfig":
        """Copy with the given fields replaced (None values mean no change)."""
        changes = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **changes) if changes else self

    # -- identity ---------------------------------------------------------------

    #: fields that steer scheduling or placement without touching the data;
    #: excluded from the hash so identical experiments hash identically
    _NON_SEMANTIC = ("out_dir", "jobs", "checks")

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical JSON document, scheduling knobs excluded."""
        doc = self.to_doc()
        for key in self._NON_SEMANTIC:
            doc.pop(key)
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()
