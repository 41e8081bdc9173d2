from dataclasses import dataclass
from queue import Queue
from threading import Event, Thread
from typing import Generator, Optional

import numpy as np

from motion_transformer.types import UsageError

SOURCE_STREAM = 101
TARGET_STREAM = 202


@dataclass(frozen=True)
class Batch:
    step: int
    x_s: np.ndarray
    y_s: np.ndarray
    x_t: np.ndarray | None


def sample_indices(rng: np.random.Generator, population: int, batch_size: int) -> np.ndarray:
    return rng.choice(population, size=min(batch_size, population), replace=False)


class BatchPrefetcher:
    """Builds training batches on a producer thread.

    Source and target batches come from separate seeded streams, so a run
    without target data draws the same source batches as one with it.
    """

    def __init__(
        self,
        source_frames: np.ndarray,
        source_labels: np.ndarray,
        target_frames: np.ndarray | None,
        batch_size: int,
        steps: int,
        seed: int,
        max_backlog: int = 8,
    ):
        if len(source_frames) == 0:
            raise UsageError("No source windows to sample from")
        if target_frames is not None and len(target_frames) == 0:
            raise UsageError("No target windows to sample from")
        self.source_frames = source_frames
        self.source_labels = source_labels
        self.target_frames = target_frames
        self.batch_size = batch_size
        self.steps = steps
        self.seed = seed
        self.result_queue: Queue[Optional[Batch]] = Queue(maxsize=max_backlog)
        self.thread = Thread(target=self.worker, daemon=True)
        self.stop_event = Event()
        self.error: Exception | None = None

    def worker(self):
        try:
            rng_s = np.random.default_rng([self.seed, SOURCE_STREAM])
            rng_t = np.random.default_rng([self.seed, TARGET_STREAM])
            for step in range(1, self.steps + 1):
                if self.stop_event.is_set():
                    break
                idx_s = sample_indices(rng_s, len(self.source_frames), self.batch_size)
                x_t = None
                if self.target_frames is not None:
                    x_t = self.target_frames[sample_indices(rng_t, len(self.target_frames), self.batch_size)]
                self.result_queue.put(Batch(step=step, x_s=self.source_frames[idx_s], y_s=self.source_labels[idx_s], x_t=x_t))
        except Exception as e:  # surfaced to the consumer in get_results
            self.error = e
        self.result_queue.put(None)  # Sentinel value to indicate completion

    def start(self):
        self.thread.start()

    def join(self):
        self.thread.join()

    def get_results(self) -> Generator[Batch, None, None]:
        while True:
            result = self.result_queue.get()
            if result is None:
                break
            yield result
        if self.error is not None:
            raise self.error

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.stop_event.set()
        # drain so a producer blocked on a full queue can see the stop event
        while self.thread.is_alive():
            while not self.result_queue.empty():
                self.result_queue.get_nowait()
            self.thread.join(timeout=0.05)
