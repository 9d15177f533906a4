"""Binary thinning, geodesic distance by fast marching, and branch labelling."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import as_mask, check_same_shape

EIGHT = np.ones((3, 3), dtype=bool)

# P2..P9 clockwise starting north, as (drow, dcol)
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


class GeodesicError(ValueError):
    pass


@dataclass(frozen=True)
class GeodesicField:
    dist: np.ndarray
    reached: np.ndarray


@dataclass(frozen=True)
class BranchLabeling:
    labels: np.ndarray
    n_branches: int
    junctions: np.ndarray
    endpoints: np.ndarray

    def branch_sizes(self) -> np.ndarray:
        """Pixel count of every branch, index ``i`` for label ``i + 1``."""
        return np.bincount(self.labels.ravel(), minlength=self.n_branches + 1)[1:]


def _ring(padded: np.ndarray) -> list[np.ndarray]:
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    return [padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in _RING]


def _zhang_suen_pass(img: np.ndarray, first: bool) -> np.ndarray:
    """Pixels deleted by one Zhang-Suen subiteration."""
    p = np.pad(img, 1)
    n = [a.astype(np.int8) for a in _ring(p)]
    p2, p3, p4, p5, p6, p7, p8, p9 = n
    count = sum(n)
    transitions = sum(((n[i] == 0) & (n[(i + 1) % 8] == 1)).astype(np.int8) for i in range(8))
    cond = img & (count >= 2) & (count <= 6) & (transitions == 1)
    if first:
        cond &= (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        cond &= (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    return cond


def _keep_components(before: np.ndarray, delete: np.ndarray) -> np.ndarray:
    """Cancel deletions that would wipe out a whole component (e.g. 2x2 blocks)."""
    after = before & ~delete
    labels, n = ndimage.label(before, structure=EIGHT)
    if n == 0:
        return delete
    survivors = np.bincount(labels[after], minlength=n + 1)
    vanished = np.flatnonzero(survivors[1:] == 0) + 1
    if vanished.size == 0:
        return delete
    delete = delete.copy()
    flat = labels.ravel()
    for lab in vanished:
        first = np.flatnonzero(flat == lab)[0]
        delete.flat[first] = False
    return delete


def _is_simple(nb: np.ndarray) -> bool:
    """Yokoi 8-connectivity number equals one, and the pixel is not an endpoint."""
    ring = [bool(nb[1 + dr, 1 + dc]) for dr, dc in _RING]
    if sum(ring) < 2:
        return False
    yokoi = 0
    for i in (0, 2, 4, 6):  # N, E, S, W
        if not ring[i] and (ring[(i + 1) % 8] or ring[(i + 2) % 8]):
            yokoi += 1
    return yokoi == 1


def _remove_staircases(img: np.ndarray) -> bool:
    """Delete redundant corner pixels in row-major order; returns True if anything changed."""
    changed = False
    p = np.pad(img, 1)
    rows, cols = np.nonzero(img)
    for r, c in zip(rows.tolist(), cols.tolist()):
        nb = p[r : r + 3, c : c + 3]
        if _is_simple(nb):
            p[r + 1, c + 1] = False
            changed = True
    img[...] = p[1:-1, 1:-1]
    return changed


def thin(mask) -> np.ndarray:
    """Zhang-Suen thinning followed by removal of redundant staircase pixels.

    The two steps alternate until neither changes the image, so the result
    is a fixed point (``thin(thin(m)) == thin(m)``). Deletions that would
    remove an entire 8-connected component are cancelled.
    """
    img = as_mask(mask).copy()
    while True:
        changed = False
        while True:
            step = False
            for first in (True, False):
                delete = _zhang_suen_pass(img, first)
                if delete.any():
                    delete = _keep_components(img, delete)
                if delete.any():
                    img &= ~delete
                    step = True
            if not step:
                break
            changed = True
        if _remove_staircases(img):
            changed = True
        if not changed:
            return img


def geodesic_distance(mask, seeds, order: int = 2, init_radius: float = 2.0) -> GeodesicField:
    """Fast marching distance from ``seeds`` with unit speed inside ``mask``.

    Updates use the 4-neighbour upwind stencil. With ``order=2`` a one-sided
    second-order difference replaces the first-order one wherever two
    strictly decreasing frozen upwind samples are available (first-order
    otherwise). Pixels within ``init_radius`` of a seed that see it along a
    straight in-mask segment start from their exact Euclidean distance.
    Heap ties are broken by row-major pixel index. Pixels not connected to a
    seed keep ``inf``.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    mask = as_mask(mask, "mask")
    seeds = as_mask(seeds, "seeds")
    check_same_shape(mask=mask, seeds=seeds)
    start = mask & seeds
    if not start.any():
        raise GeodesicError("seeds do not intersect the mask")
    h, w = mask.shape
    dist = np.full(h * w, np.inf)
    frozen = np.zeros(h * w, dtype=bool)
    inside = mask.ravel()
    heap: list[tuple[float, int]] = []
    for idx in np.flatnonzero(start.ravel()).tolist():
        dist[idx] = 0.0
        heap.append((0.0, idx))
    if init_radius > 0:
        near = _near_seed_distances(mask, start, init_radius)
        for idx in np.flatnonzero(np.isfinite(near).ravel()).tolist():
            if near.flat[idx] > 0:
                dist[idx] = near.flat[idx]
                heap.append((dist[idx], idx))
    heapq.heapify(heap)

    while heap:
        d, idx = heapq.heappop(heap)
        if frozen[idx] or d > dist[idx]:
            continue
        frozen[idx] = True
        r, c = divmod(idx, w)
        for nr, nc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if frozen[nidx] or not inside[nidx]:
                continue
            new = _eikonal_update(dist, frozen, h, w, nr, nc, order)
            if new < dist[nidx]:
                dist[nidx] = new
                heapq.heappush(heap, (new, nidx))

    dist = dist.reshape(h, w)
    return GeodesicField(dist=dist, reached=np.isfinite(dist))


def _near_seed_distances(mask, seeds, radius) -> np.ndarray:
    """Euclidean distance to the nearest seed for in-mask pixels within ``radius``
    whose straight segment to that seed stays inside the mask; ``inf`` elsewhere."""
    edt, (ir, ic) = ndimage.distance_transform_edt(~seeds, return_indices=True)
    out = np.full(mask.shape, np.inf)
    rows, cols = np.nonzero(mask & (edt <= radius))
    for r, c in zip(rows.tolist(), cols.tolist()):
        sr, sc = ir[r, c], ic[r, c]
        n = int(np.ceil(2 * edt[r, c])) + 1
        t = np.linspace(0.0, 1.0, n)
        pr = np.rint(r + (sr - r) * t).astype(int)
        pc = np.rint(c + (sc - c) * t).astype(int)
        if mask[pr, pc].all():
            out[r, c] = edt[r, c]
    return out


def _upwind(dist, frozen, h, w, r, c, dr, dc, order):
    """Best frozen upwind sample along one axis as (coef, rhs, u1), or None."""
    best = None
    for s in (-1, 1):
        r1, c1 = r + s * dr, c + s * dc
        if not (0 <= r1 < h and 0 <= c1 < w):
            continue
        i1 = r1 * w + c1
        if not frozen[i1]:
            continue
        u1 = dist[i1]
        if best is not None and u1 >= best[2]:
            continue
        term = (1.0, u1, u1)
        if order == 2:
            r2, c2 = r + 2 * s * dr, c + 2 * s * dc
            if 0 <= r2 < h and 0 <= c2 < w:
                i2 = r2 * w + c2
                if frozen[i2] and dist[i2] < u1:
                    term = (1.5, 2.0 * u1 - 0.5 * dist[i2], u1)
        best = term
    return best


def _eikonal_update(dist, frozen, h, w, r, c, order) -> float:
    terms = [
        t
        for t in (
            _upwind(dist, frozen, h, w, r, c, 0, 1, order),
            _upwind(dist, frozen, h, w, r, c, 1, 0, order),
        )
        if t is not None
    ]
    terms.sort(key=lambda t: t[2])
    cap = terms[0][2] + 1.0
    for k in (len(terms), 1):
        used = terms[:k]
        a2 = sum(t[0] * t[0] for t in used)
        ab = sum(t[0] * t[1] for t in used)
        b2 = sum(t[1] * t[1] for t in used)
        disc = ab * ab - a2 * (b2 - 1.0)
        if disc >= 0.0:
            u = (ab + math.sqrt(disc)) / a2
            if all(u >= t[2] for t in used):
                return min(u, cap)
    return cap


def neighbor_count(skel) -> np.ndarray:
    skel = as_mask(skel)
    counts = ndimage.convolve(skel.astype(np.int32), EIGHT.astype(np.int32), mode="constant")
    return np.where(skel, counts - 1, 0)


def branch_decompose(skel) -> BranchLabeling:
    """Label the branches of a thin skeleton.

    Junctions are skeleton pixels with at least three 8-neighbours; adjacent
    junction pixels form one junction node. Branches are the 8-connected
    components of the remaining skeleton, numbered in row-major order of
    their first pixel.
    """
    skel = as_mask(skel, "skeleton")
    nbrs = neighbor_count(skel)
    junctions = skel & (nbrs >= 3)
    endpoints = skel & (nbrs == 1)
    # ndimage.label numbers components by first pixel in raster order
    labels, n = ndimage.label(skel & ~junctions, structure=EIGHT)
    return BranchLabeling(
        labels=labels.astype(np.int64),
        n_branches=int(n),
        junctions=junctions,
        endpoints=endpoints,
    )


def junction_nodes(branches: BranchLabeling) -> int:
    """Number of junction nodes after merging adjacent junction pixels."""
    _, n = ndimage.label(branches.junctions, structure=EIGHT)
    return int(n)
