"""Worker pool used by the mode-parallel solvers.

Results always come back in input order, so reductions over them are
deterministic whatever the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

from django.conf import settings

logger = logging.getLogger(__name__)


def resolve_jobs(jobs=None) -> int:
    """Explicit ``jobs`` wins, then the CONE_LAB_JOBS setting, then 1."""
    if jobs is None:
        jobs = getattr(settings, 'CONE_LAB_JOBS', 1)
    try:
        jobs = int(jobs)
    except (TypeError, ValueError):
        logger.warning(f"Ignoring invalid worker count {jobs!r}")
        jobs = 1
    return max(1, jobs)


def parallel_map(fn, items, jobs=None) -> list:
    items = list(items)
    workers = min(resolve_jobs(jobs), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
