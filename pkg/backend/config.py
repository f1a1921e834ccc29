import os

# Settings come from the environment; main.py loads backend/.env first.

VERSION = "0.3.0"

# Dense O(d^3) diagonalization stays desk-feasible below this size.
MAX_DIMENSION = int(os.environ.get("OPFID_MAX_DIM", "10000"))

MAX_WORKERS = int(os.environ.get("OPFID_WORKERS", "4"))

LOG_LEVEL = os.environ.get("OPFID_LOG_LEVEL", "INFO").upper()


def default_cache_dir():
    """Cache directory from OPFID_CACHE, or None when caching is off."""
    path = os.environ.get("OPFID_CACHE")
    return path or None
