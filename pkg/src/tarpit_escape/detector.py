"""Sliding-window UI tarpit detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .phash import check_threshold, is_ui_similar
from .ui import UiState

DEFAULT_WINDOW = 8
DEFAULT_THETA = 0.95


@dataclass(frozen=True)
class DetectorConfig:
    k: int = DEFAULT_WINDOW
    theta: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"window length k must be >= 2, got {self.k}")
        check_threshold(self.theta)


# The visited-state sequence is a plain list that only ever grows.
StateSequence = list


def has_tarpit(states: Sequence[UiState], cfg: DetectorConfig = DetectorConfig()) -> bool:
    """True when every adjacent pair among the last ``cfg.k`` states looks alike."""
    n = len(states)
    if n < cfg.k:
        return False
    for i in range(n - cfg.k, n - 1):
        if not is_ui_similar(states[i].screenshot, states[i + 1].screenshot, cfg.theta):
            return False
    return True
