"""Tarpit memory: remembered escapes and the probabilistic reuse policy."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .phash import PHash, check_threshold, hash_similarity
from .ui import InteractionType, Rect, UiEvent, UiState

DEFAULT_MEMORY_THETA = 0.99
DEFAULT_REUSE_PROBABILITY = 0.8


@dataclass(frozen=True)
class MemoryConfig:
    theta_mem: float = DEFAULT_MEMORY_THETA
    p_reuse: float = DEFAULT_REUSE_PROBABILITY
    # detector threshold, only used to check theta_mem is at least as strict
    theta: float = 0.95

    def __post_init__(self) -> None:
        check_threshold(self.theta_mem)
        if self.theta_mem < self.theta:
            raise ValueError(
                f"memory threshold {self.theta_mem} is looser than the detector's {self.theta}"
            )
        if not 0.0 <= self.p_reuse <= 1.0:
            raise ValueError(f"reuse probability must lie in [0, 1], got {self.p_reuse}")


@dataclass
class TarpitRecord:
    tarpit_id: int
    phash: PHash
    representative_state: Optional[UiState] = None
    actions: list[UiEvent] = field(default_factory=list)

    def add(self, event: UiEvent) -> bool:
        if any(a.key == event.key for a in self.actions):
            return False
        self.actions.append(event)
        return True

    def to_dict(self) -> dict:
        return {
            "tarpit_id": self.tarpit_id,
            "screenshot_hash": self.phash.hex(),
            "actions": [
                {"type": a.type.value, "bounds": a.bounds.as_list(), "payload": a.payload}
                for a in self.actions
            ],
        }


@dataclass(frozen=True)
class Reuse:
    event: UiEvent
    record: TarpitRecord


@dataclass(frozen=True)
class Delegate:
    record: Optional[TarpitRecord] = None


Dispatch = Union[Reuse, Delegate]


class TarpitMemory:
    """Registry of tarpits keyed by screenshot hash.

    Records are never evicted and their representative state is the first one
    seen; later matches only extend the action list.
    """

    def __init__(self) -> None:
        self.records: list[TarpitRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def lookup(self, state: UiState, cfg: MemoryConfig = MemoryConfig()) -> Optional[TarpitRecord]:
        return self.lookup_hash(state.screenshot.phash, cfg)

    def lookup_hash(self, h: PHash, cfg: MemoryConfig = MemoryConfig()) -> Optional[TarpitRecord]:
        # records are kept in tarpit_id order, so the first hit is the lowest id
        for rec in self.records:
            if hash_similarity(rec.phash, h) >= cfg.theta_mem:
                return rec
        return None

    def record_escape(
        self, state: UiState, event: UiEvent, cfg: MemoryConfig = MemoryConfig()
    ) -> TarpitRecord:
        rec = self.lookup(state, cfg)
        if rec is None:
            next_id = self.records[-1].tarpit_id + 1 if self.records else 0
            rec = TarpitRecord(next_id, state.screenshot.phash, state)
            self.records.append(rec)
        rec.add(event)
        return rec

    def dispatch(
        self,
        state: UiState,
        zeta: float,
        rng: random.Random,
        cfg: MemoryConfig = MemoryConfig(),
    ) -> Dispatch:
        rec = self.lookup(state, cfg)
        if rec is not None and rec.actions and zeta <= cfg.p_reuse:
            return Reuse(rng.choice(rec.actions), rec)
        return Delegate(rec)

    def to_json(self) -> list[dict]:
        return [r.to_dict() for r in self.records]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def from_json(cls, data: list[dict]) -> "TarpitMemory":
        mem = cls()
        for item in sorted(data, key=lambda d: d["tarpit_id"]):
            rec = TarpitRecord(int(item["tarpit_id"]), PHash.from_hex(item["screenshot_hash"]))
            for a in item["actions"]:
                rec.add(UiEvent(0, Rect.from_list(a["bounds"]), InteractionType(a["type"]), a.get("payload")))
            mem.records.append(rec)
        return mem

    @classmethod
    def load(cls, path: str | Path) -> "TarpitMemory":
        return cls.from_json(json.loads(Path(path).read_text()))
