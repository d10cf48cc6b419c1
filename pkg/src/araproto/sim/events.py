"""Minimal deterministic event queue."""

import heapq
import itertools


class EventQueue:
    """Callbacks ordered by (time, insertion sequence)."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()
        self.now = 0

    def schedule(self, time, fn, *args):
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        heapq.heappush(self._heap, (time, next(self._seq), fn, args))

    def __len__(self):
        return len(self._heap)

    def run(self):
        while self._heap:
            time, _, fn, args = heapq.heappop(self._heap)
            self.now = time
            fn(*args)
