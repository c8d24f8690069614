"""
Replication Pool - independent particle solves in parallel
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

logger = logging.getLogger(__name__)


# ==========================================================
# PER-REPLICATION SEEDS
# ==========================================================
def replication_seed(master_seed, rep):
    """Seed of replication ``rep``; depends only on (master_seed, rep)."""
    ss = np.random.SeedSequence([int(master_seed), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ==========================================================
# POOL
# ==========================================================
class ReplicationPool:

    def __init__(self, max_threads=1):
        if max_threads < 1:
            raise ValueError(f"max_threads must be >= 1, got {max_threads}")
        self.max_threads = max_threads

    def run(self, job, jobs):
        """Run ``job(item)`` for every item; results come back in item order.

        A failing replication re-raises its exception after the others finish.
        """
        items = list(jobs)
        if self.max_threads == 1 or len(items) <= 1:
            return [job(item) for item in items]

        results = [None] * len(items)
        errors = []
        with ThreadPoolExecutor(max_workers=self.max_threads) as executor:
            futures = {executor.submit(job, item): idx for idx, item in enumerate(items)}
            for future in as_completed(futures):
                idx = futures[future]
                try:
                    results[idx] = future.result()
                except Exception as e:
                    logger.error("replication %d failed: %s", idx, e)
                    errors.append((idx, e))

        if errors:
            raise min(errors, key=lambda pair: pair[0])[1]
        return results
