"""Virtual time for simulated runs."""

from __future__ import annotations

from dataclasses import dataclass

BASE_EPOCH = 1_760_000_000


@dataclass
class VirtualClock:
    """Milliseconds since scenario start, plus an epoch offset for wall-clock reads."""

    ms: float = 0.0
    epoch: int = BASE_EPOCH
    offset: int = 0  # seconds added to the client's notion of "now"

    def advance(self, ms: float):
        if ms < 0:
            raise ValueError("time runs forward")
        self.ms += ms

    def monotonic_ms(self) -> float:
        return self.ms

    def now(self) -> int:
        return self.epoch + self.offset + int(self.ms // 1000)
