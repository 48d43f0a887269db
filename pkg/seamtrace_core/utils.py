import hashlib
import json
import logging
import os

from joblib import Parallel, delayed

JOBS_ENV = "SEAMTRACE_JOBS"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(verbosity=0):
    """0 -> WARNING, 1 -> INFO, 2+ -> DEBUG. Always logs to stderr."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    return level


def resolve_jobs(jobs=None):
    if jobs is not None:
        return max(1, int(jobs))
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", JOBS_ENV, raw)
        return 1


def parallel_map(fn, items, jobs=1, prefer=None):
    """Ordered map; runs inline for jobs == 1 so single-job runs stay trivially reproducible."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=jobs, prefer=prefer)(delayed(fn)(item) for item in items)


def dumps_stable(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()
