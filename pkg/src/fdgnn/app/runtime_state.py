from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Iterator


@dataclass(frozen=True)
class RunStateSnapshot:
    started_at: datetime
    pid: int
    command: str
    dataset: str | None
    seed: int | None
    dataset_checksum: str | None
    phase_seconds: dict[str, float]
    last_error: str | None


@dataclass
class RunState:
    started_at: datetime
    pid: int
    command: str
    dataset: str | None = None
    seed: int | None = None
    dataset_checksum: str | None = None
    phase_seconds: dict[str, float] = field(default_factory=dict)
    last_error: str | None = None

    def update(self, **changes: Any) -> None:
        for key, value in changes.items():
            if hasattr(self, key):
                setattr(self, key, value)

    @contextmanager
    def phase(self, name: str, logger: logging.Logger | None = None) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - started
            self.phase_seconds[name] = self.phase_seconds.get(name, 0.0) + elapsed
            if logger is not None:
                logger.info("phase_timing", extra={"phase": name, "seconds": round(elapsed, 4)})

    def snapshot(self) -> RunStateSnapshot:
        return RunStateSnapshot(
            started_at=self.started_at,
            pid=self.pid,
            command=self.command,
            dataset=self.dataset,
            seed=self.seed,
            dataset_checksum=self.dataset_checksum,
            phase_seconds=dict(self.phase_seconds),
            last_error=self.last_error,
        )
