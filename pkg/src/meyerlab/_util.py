"""Shared numerical helpers: tolerance clustering, RNG, threading, JSON."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

#: Absolute tolerance used for every set-membership / equality decision.
TOL = 1e-9


def as_points(raw, dim: int | None = None) -> np.ndarray:
    """Coerce ``raw`` to a float array of shape ``(n, dim)``."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is None or dim == 1:
            arr = arr.reshape(-1, 1)
        else:
            arr = arr.reshape(-1, dim)
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    return arr


def lexsort_rows(pts: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically (first coordinate most significant)."""
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=int)
    keys = tuple(pts[:, k] for k in reversed(range(pts.shape[1])))
    return np.lexsort(keys)


def cluster_rows(pts: np.ndarray, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Group rows that agree within ``tol`` coordinate-wise.

    Clustering is single linkage along each coordinate in turn, so chains of
    near-equal values merge; distinct values in this package are separated by many
    orders of magnitude more than ``tol``.

    Returns ``(order, labels)``: ``order`` sorts the rows lexicographically by
    cluster and ``labels[i]`` is the cluster index of row ``order[i]``
    (non-decreasing, starting at 0).
    """
    n, d = pts.shape
    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        labels = np.zeros(n, dtype=int)
        if n:
            labels[1:] = np.cumsum(np.diff(pts[order, 0]) > tol)
        return order, labels
    order = np.arange(n)
    labels = np.zeros(n, dtype=int)
    for k in range(d):
        # Sort within current groups by coordinate k, then refine groups.
        sub = np.lexsort((pts[order, k], labels))
        order, labels = order[sub], labels[sub]
        vals = pts[order, k]
        brk = np.zeros(n, dtype=bool)
        if n:
            brk[1:] = (labels[1:] != labels[:-1]) | (np.diff(vals) > tol)
        labels = np.cumsum(brk)
    return order, labels


def unique_rows(pts: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Deduplicate rows within ``tol`` keeping the first representative, sorted."""
    if pts.shape[0] == 0:
        return pts.copy()
    order, labels = cluster_rows(pts, tol)
    first = np.ones(len(labels), dtype=bool)
    first[1:] = labels[1:] != labels[:-1]
    out = pts[order[first]]
    return out[lexsort_rows(out)]


def match_rows(query: np.ndarray, ref: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Index into ``ref`` of a row within ``tol`` (sup norm) of each query row, or -1."""
    from scipy.spatial import cKDTree

    if ref.shape[0] == 0 or query.shape[0] == 0:
        return np.full(query.shape[0], -1, dtype=int)
    dist, idx = cKDTree(ref).query(query, k=1, p=np.inf, distance_upper_bound=tol * (1 + 1e-6))
    idx = np.where(np.isfinite(dist), idx, -1)
    return idx.astype(int)


def contains_rows(query: np.ndarray, ref: np.ndarray, tol: float = TOL) -> np.ndarray:
    return match_rows(query, ref, tol) >= 0


def frac_phase(points: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """``x·χ`` reduced to ``[-1/2, 1/2]`` for every (frequency, point) pair.

    Shape ``(n_freq, n_pts)``.  Reducing before multiplying by 2π keeps integer
    pairings exact, and ``t - rint(t)`` is odd in ``t`` so ``χ -> -χ`` negates the
    result bit for bit.
    """
    t = freqs @ points.T
    return t - np.rint(t)


def n_threads() -> int:
    """Worker cap from ``MEYERLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("MEYERLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def chunked_map(fn: Callable[[np.ndarray], np.ndarray], items: np.ndarray,
                chunk: int) -> np.ndarray:
    """Apply ``fn`` to consecutive chunks of ``items`` and concatenate in order.

    Chunks may run on a thread pool (numpy releases the GIL); output order is the
    input order regardless of scheduling.
    """
    if len(items) == 0:
        return np.zeros(0)
    pieces: Sequence[np.ndarray] = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    workers = min(n_threads(), len(pieces))
    if workers <= 1:
        return np.concatenate([fn(p) for p in pieces])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(fn, pieces)))


def parallel_map(fn: Callable, items) -> list:
    """``[fn(x) for x in items]`` on a thread pool capped by :func:`n_threads`, order kept."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rng(seed: int) -> np.random.Generator:
    """Seeded 64-bit generator (PCG64, numpy's documented default bit generator)."""
    return np.random.Generator(np.random.PCG64(seed))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays into plain Python containers."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip float repr."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"
