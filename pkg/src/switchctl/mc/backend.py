"""Backend selection for the path-simulation hot loop.

The compiled extension ``switchctl._pathsim`` (Cython) is used when it
imported cleanly, the problem has diagonal diffusion, and the environment
variable SWITCHCTL_FORCE_PYTHON is unset.  Both backends consume identical
per-path Gaussian streams, so trajectories agree bitwise and estimates to
rounding; the benchmark in benchmarks/bench_backends.py compares them.
"""
from __future__ import annotations

import os

try:
    from .. import _pathsim  # type: ignore[attr-defined]

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - depends on build environment
    _pathsim = None
    HAVE_KERNEL = False


def kernel_module():
    return _pathsim


def kernel_enabled() -> bool:
    if not HAVE_KERNEL:
        return False
    return os.environ.get("SWITCHCTL_FORCE_PYTHON", "") in ("", "0")


def backend_name() -> str:
    return "cython" if kernel_enabled() else "numpy"


def worker_threads() -> int:
    """Worker-thread cap from SWITCHCTL_THREADS (default 1)."""
    raw = os.environ.get("SWITCHCTL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
