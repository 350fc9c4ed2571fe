"""Worker-pool helper: data-parallel row maps over immutable inputs.

The caller supplies the worker count; the POLARPATH_THREADS environment
variable is the fallback, then the hardware count.  Work items are row
blocks, so numpy releases the GIL inside each chunk.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is not None:
        if threads < 1:
            raise ValueError("thread count must be positive")
        return threads
    env = os.environ.get("POLARPATH_THREADS")
    if env:
        value = int(env)
        if value < 1:
            raise ValueError("POLARPATH_THREADS must be positive")
        return value
    return os.cpu_count() or 1


def map_in_chunks(fill: Callable[[slice], None], n_rows: int, threads: Optional[int] = None) -> None:
    """Run fill(slice) over row blocks of [0, n_rows), possibly in parallel."""
    workers = resolve_threads(threads)
    if workers == 1 or n_rows < 2 * workers:
        fill(slice(0, n_rows))
        return
    chunk = (n_rows + workers - 1) // workers
    slices = [slice(start, min(start + chunk, n_rows)) for start in range(0, n_rows, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fill, slices))
