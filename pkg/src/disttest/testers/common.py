"""Shared plumbing for the testers: verdicts, budget tracking, rejection sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..core import BudgetExceededError, SampleOracle

__all__ = ["TestVerdict", "BudgetTracker", "ConditionalOracle"]


@dataclass
class TestVerdict:
    """Outcome of one tester run.

    ``samples_used`` maps oracle names to the number of draws this run
    charged to them (deltas of the oracle counters, so they are exact even
    when an oracle was used before).  ``trace`` is a list of JSON-friendly
    stage records for debugging and replay audits.
    """

    accept: bool
    samples_used: Dict[str, int]
    trace: List[dict] = field(default_factory=list)

    @property
    def answer(self) -> str:
        return "YES" if self.accept else "NO"

    @property
    def total_samples(self) -> int:
        return sum(self.samples_used.values())


class BudgetTracker:
    """Records oracle counters at construction and reports deltas."""

    def __init__(self, **oracles: SampleOracle):
        self._oracles = {k: v for k, v in oracles.items() if v is not None}
        self._start = {k: v.samples_drawn for k, v in self._oracles.items()}

    def add(self, name: str, oracle: SampleOracle) -> None:
        self._oracles[name] = oracle
        self._start[name] = oracle.samples_drawn

    def used(self) -> Dict[str, int]:
        return {
            k: v.samples_drawn - self._start[k] for k, v in self._oracles.items()
        }

    def verdict(self, accept: bool, trace: List[dict]) -> TestVerdict:
        return TestVerdict(accept=bool(accept), samples_used=self.used(), trace=trace)


class ConditionalOracle(SampleOracle):
    """Samples of a base oracle conditioned on a subset, via rejection.

    Draws from the base until enough land in ``subset`` and re-labels them
    ``0..len(subset)-1``.  ``accept_rate`` is the caller's lower bound on the
    subset's probability; the total number of base draws per request is
    capped at ``cap_factor`` times the expectation implied by that rate, and
    exceeding the cap raises :class:`BudgetExceededError`.
    """

    def __init__(
        self,
        base: SampleOracle,
        subset: np.ndarray,
        accept_rate: float,
        cap_factor: float = 1e6,
    ):
        subset = np.asarray(subset, dtype=np.int64)
        if subset.size == 0:
            raise ValueError("cannot condition on an empty subset")
        if not (0.0 < accept_rate <= 1.0):
            raise ValueError("accept_rate must lie in (0, 1]")
        super().__init__(subset.size)
        self._base = base
        self._rate = float(accept_rate)
        self._cap_factor = float(cap_factor)
        self._position = np.full(base.n, -1, dtype=np.int64)
        self._position[subset] = np.arange(subset.size)

    def _draw(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.int64)
        got = 0
        spent = 0
        hits = 0
        cap = self._cap_factor * max(size / self._rate, 1.0)
        # ``accept_rate`` is only a lower bound, so sizing batches by it can
        # overdraw badly; a pilot batch measures the true acceptance and the
        # running estimate keeps the total overhead a few percent.
        guess = self._rate
        while got < size:
            want = max(int(1.05 * (size - got) / guess) + 16, 64)
            if spent == 0:
                want = min(want, 4096)
            want = int(min(want, cap - spent))
            if want <= 0:
                raise BudgetExceededError(
                    f"rejection sampling exceeded its cap of {cap:.3g} base draws"
                )
            batch = self._position[self._base.draw(want)]
            spent += want
            batch = batch[batch >= 0]
            hits += batch.size
            take = min(batch.size, size - got)
            out[got : got + take] = batch[:take]
            got += take
            guess = max(hits / spent, self._rate / 8.0)
        return out

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn
