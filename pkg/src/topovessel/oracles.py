"""Slow, independent reference implementations used to check the fast code paths.

Everything here is written as explicit per-pixel loops on purpose: it shares
no code with the modules it checks.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


def brute_soft_skeleton(p, k: int = 5) -> np.ndarray:
    """Soft skeleton with per-pixel loops: cross-shaped min, 3x3 max, out-of-image ignored."""
    p = np.array(p, dtype=np.float64)
    h, w = p.shape

    def erode(x):
        out = np.empty_like(x)
        for r in range(h):
            for c in range(w):
                vals = [x[r, c]]
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    if 0 <= r + dr < h and 0 <= c + dc < w:
                        vals.append(x[r + dr, c + dc])
                out[r, c] = min(vals)
        return out

    def dilate(x):
        out = np.empty_like(x)
        for r in range(h):
            for c in range(w):
                out[r, c] = max(
                    x[rr, cc]
                    for rr in range(max(r - 1, 0), min(r + 2, h))
                    for cc in range(max(c - 1, 0), min(c + 2, w))
                )
        return out

    def relu(x):
        return np.where(x > 0, x, 0.0)

    x = p
    skel = relu(x - dilate(erode(x)))
    for _ in range(k):
        x = erode(x)
        delta = relu(x - dilate(erode(x)))
        skel = skel + delta * (1.0 - skel)
    return skel


def chamfer_dijkstra(mask, seeds) -> np.ndarray:
    """8-neighbour Dijkstra with steps 1 and sqrt(2); diagonals need both axial neighbours inside."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    d = np.full((h, w), np.inf)
    heap = []
    for r, c in zip(*np.nonzero(np.asarray(seeds, dtype=bool) & mask)):
        d[r, c] = 0.0
        heap.append((0.0, int(r) * w + int(c)))
    heapq.heapify(heap)
    while heap:
        dd, idx = heapq.heappop(heap)
        r, c = divmod(idx, w)
        if dd > d[r, c]:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not mask[nr, nc]:
                    continue
                if dr and dc and not (mask[r + dr, c] and mask[r, c + dc]):
                    continue
                nd = dd + (math.sqrt(2.0) if dr and dc else 1.0)
                if nd < d[nr, nc]:
                    d[nr, nc] = nd
                    heapq.heappush(heap, (nd, nr * w + nc))
    return d


def corridor_maze(rng, size: int = 50, width: int = 3):
    """Depth-first maze of ``width``-pixel corridors on a ``size`` square.

    Returns ``(mask, seeds)``; the seeds are the first column of the start cell.
    """
    pitch = width + 1
    n = (size - 1) // pitch
    mask = np.zeros((size, size), dtype=bool)

    def corner(i, j):
        return 1 + i * pitch, 1 + j * pitch

    seen = np.zeros((n, n), dtype=bool)
    seen[0, 0] = True
    stack = [(0, 0)]
    r, c = corner(0, 0)
    mask[r : r + width, c : c + width] = True
    while stack:
        i, j = stack[-1]
        options = [
            (i + di, j + dj)
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1))
            if 0 <= i + di < n and 0 <= j + dj < n and not seen[i + di, j + dj]
        ]
        if not options:
            stack.pop()
            continue
        a, b = options[rng.integers(len(options))]
        seen[a, b] = True
        stack.append((a, b))
        r0, c0 = corner(i, j)
        r1, c1 = corner(a, b)
        mask[min(r0, r1) : max(r0, r1) + width, min(c0, c1) : max(c0, c1) + width] = True
    seeds = np.zeros_like(mask)
    r, c = corner(0, 0)
    seeds[r : r + width, c] = True
    return mask, seeds


def count_covered(pred, ref) -> tuple[int, int]:
    """(pixels of ``ref`` also in ``pred``, pixels of ``ref``) by scanning every pixel."""
    pred = np.asarray(pred, dtype=bool)
    ref = np.asarray(ref, dtype=bool)
    hit = total = 0
    for r in range(ref.shape[0]):
        for c in range(ref.shape[1]):
            if ref[r, c]:
                total += 1
                if pred[r, c]:
                    hit += 1
    return hit, total


def count_detected_branches(pred, labels, n_branches: int, tau: float) -> tuple[int, int]:
    """(branches with covered fraction >= tau, n_branches) by scanning every pixel."""
    pred = np.asarray(pred, dtype=bool)
    size = [0] * (n_branches + 1)
    hit = [0] * (n_branches + 1)
    for r in range(labels.shape[0]):
        for c in range(labels.shape[1]):
            b = int(labels[r, c])
            if b:
                size[b] += 1
                hit[b] += int(pred[r, c])
    detected = sum(1 for b in range(1, n_branches + 1) if hit[b] / size[b] >= tau)
    return detected, n_branches


def bar_instance(gap: bool = False):
    """3x20 horizontal bar in a 5x22 canvas with its middle row as skeleton.

    With ``gap`` the middle column of the bar (all three rows) is removed.
    """
    g = np.zeros((5, 22), dtype=bool)
    g[1:4, 1:21] = True
    skel = np.zeros_like(g)
    skel[2, 1:21] = True
    if gap:
        cut = g.copy()
        cut[:, 11] = False
        return cut, skel
    return g, skel


def dice_value(p, g, eps: float = 1e-7) -> float:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return 1.0 - (2.0 * float((p * g).sum()) + eps) / (float(p.sum()) + float(g.sum()) + eps)


def cldice_value(p, g, g_skel, k: int = 5, eps: float = 1e-7) -> float:
    p = np.asarray(p, dtype=np.float64)
    s = brute_soft_skeleton(p, k)
    g = np.asarray(g, dtype=np.float64)
    gs = np.asarray(g_skel, dtype=np.float64)
    tprec = (float((s * g).sum()) + eps) / (float(s.sum()) + eps)
    tsens = (float((gs * p).sum()) + eps) / (float(gs.sum()) + eps)
    return 1.0 - 2.0 * tprec * tsens / (tprec + tsens)
