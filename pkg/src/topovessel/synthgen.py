"""Synthetic binary vessel trees with topology known by construction.

Each branch is grown as an 8-connected pixel path: a heading that drifts by
at most ``bend`` radians per step, advancing exactly one pixel along its
dominant axis, so a branch of ``n`` pixels has ``n`` recorded centerline
samples. Branches end in a bifurcation until ``depth`` is reached, and the
mask is a square brush of side ``width`` swept along every path (the
chessboard-metric disk, which thins back onto the path far more reliably
than the Euclidean one), with enclosed holes filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .raster import AVGroundTruth
from .skeletal import BranchLabeling, neighbor_count


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class TreeSpec:
    seed: int = 0
    depth: int = 2
    arm_length: tuple[int, int] = (18, 4)  # mean, jitter (pixels)
    width: int | tuple[int, ...] = (3, 3, 1)  # per depth level, last value repeats
    bend: float = 0.08  # max heading change per pixel step (radians)
    canvas: tuple[int, int] = (96, 96)  # width, height
    n_trees: int = 1
    split_angle: tuple[float, float] = (0.5, 0.9)  # half-angle range at a bifurcation (radians)
    clearance: int = 3  # min background gap between unrelated branches (pixels)
    max_retries: int = 200

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        mean, jitter = self.arm_length
        if mean - jitter < 5 or jitter < 0:
            raise ValueError(f"arm_length must keep arms >= 5 px, got {self.arm_length}")
        if min(self.widths()) < 1:
            raise ValueError("widths must be >= 1")
        if self.bend < 0:
            raise ValueError(f"bend must be >= 0, got {self.bend}")
        if min(self.canvas) < 8:
            raise ValueError(f"canvas too small: {self.canvas}")
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        lo, hi = self.split_angle
        if not 0 < lo <= hi < np.pi / 2:
            raise ValueError(f"split_angle must satisfy 0 < lo <= hi < pi/2, got {self.split_angle}")

    def widths(self) -> tuple[int, ...]:
        return (self.width,) if isinstance(self.width, int) else tuple(self.width)

    def width_at(self, level: int) -> int:
        w = self.widths()
        return w[min(level, len(w) - 1)]

    @property
    def branches_per_tree(self) -> int:
        return 2 ** (self.depth + 1) - 1


@dataclass(frozen=True)
class SynthTruth:
    mask: np.ndarray
    centerline: np.ndarray
    branch_labels: np.ndarray  # 1..n on centerline pixels, 0 on joints and background
    junctions: np.ndarray
    n_branches: int
    polylines: tuple[np.ndarray, ...]  # (n_i, 2) float row/col samples per branch
    paths: tuple[np.ndarray, ...]  # (n_i, 2) integer pixels per branch
    branch_class: tuple[str, ...]
    seed: int = 0
    retries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def branches(self) -> BranchLabeling:
        ends = self.centerline & (neighbor_count(self.centerline) == 1)
        return BranchLabeling(self.branch_labels, self.n_branches, self.junctions, ends)

    def class_mask(self, name: str) -> np.ndarray:
        """Mask pixels of the trees carrying class ``name``."""
        ids = [i + 1 for i, c in enumerate(self.branch_class) if c == name]
        return self.mask & np.isin(self.owner, ids)

    @property
    def owner(self) -> np.ndarray:
        """Branch id (1-based) of the nearest centerline pixel for every mask pixel, 0 off the mask."""
        return _owner(self)

    def ground_truth(self) -> AVGroundTruth:
        return AVGroundTruth(
            self.class_mask("arteriole"),
            self.class_mask("venule"),
            self.mask.copy(),
            np.ones(self.shape, dtype=bool),
        )

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "retries": self.retries,
            "n_branches": self.n_branches,
            "height": self.shape[0],
            "width": self.shape[1],
            "branch_class": list(self.branch_class),
            "polylines": [np.round(p, 6).tolist() for p in self.polylines],
            **self.meta,
        }


def _footprint(width: int) -> np.ndarray:
    """Square brush of side ``width``; even sides extend down and right of the path pixel."""
    k = width // 2
    brush = np.zeros((2 * k + 1, 2 * k + 1), dtype=bool)
    lo = k - (width - 1) // 2
    brush[lo : lo + width, lo : lo + width] = True
    return brush


def _grow_path(rng, start_rc, heading, n_pixels, bend):
    """Pixel path of ``n_pixels`` samples after ``start_rc`` (exclusive)."""
    pos = np.asarray(start_rc, dtype=np.float64)
    pts = []
    pix = []
    for _ in range(n_pixels):
        heading += rng.uniform(-bend, bend)
        d = np.array([np.sin(heading), np.cos(heading)])
        pos = pos + d / np.abs(d).max()
        pts.append(pos.copy())
        pix.append(np.floor(pos + 0.5).astype(np.int64))
    return np.array(pts), np.array(pix), heading


def _sweep(shape, pixels, width):
    img = np.zeros(shape, dtype=bool)
    img[pixels[:, 0], pixels[:, 1]] = True
    if width > 1:
        img = ndimage.binary_dilation(img, structure=_footprint(width))
    return img


class _Canvas:
    def __init__(self, spec: TreeSpec):
        w, h = spec.canvas
        self.shape = (h, w)
        self.mask = np.zeros(self.shape, dtype=bool)
        self.centerline = np.zeros(self.shape, dtype=bool)
        self.spec = spec

    def fresh(self, pixels) -> bool:
        """No repeated pixel and no pixel already on a centerline."""
        return len(np.unique(pixels, axis=0)) == len(pixels) and not self.centerline[pixels[:, 0], pixels[:, 1]].any()

    def clearance_map(self, exempt: np.ndarray | None) -> np.ndarray | None:
        """Chessboard distance to the nearest blocking mask pixel (``None`` if nothing blocks)."""
        blocked = self.mask if exempt is None else self.mask & ~exempt
        if not blocked.any():
            return None
        return ndimage.distance_transform_cdt(~blocked, metric="chessboard")

    def fits(self, pixels, width, dist: np.ndarray | None) -> bool:
        """Inside the canvas with a margin, and the swept brush more than ``clearance`` from ``dist``'s blockers."""
        h, w = self.shape
        margin = width // 2 + 1
        if pixels[:, 0].min() < margin or pixels[:, 1].min() < margin:
            return False
        if pixels[:, 0].max() >= h - margin or pixels[:, 1].max() >= w - margin:
            return False
        if dist is None:
            return True
        # every brush pixel lies within width // 2 of its path pixel
        return bool(dist[pixels[:, 0], pixels[:, 1]].min() > width // 2 + self.spec.clearance)


def generate(spec: TreeSpec) -> SynthTruth:
    """Draw ``spec.n_trees`` binary trees; deterministic in ``spec.seed``.

    Branches that leave the canvas or come closer than ``spec.clearance``
    to an unrelated branch are redrawn; after ``spec.max_retries`` failed
    draws of one branch the whole tree is restarted, and a tree that cannot
    be placed raises :class:`SynthError`.
    """
    rng = np.random.default_rng(spec.seed)
    canvas = _Canvas(spec)
    polylines, paths, levels, parents, classes = [], [], [], [], []
    retries = 0
    for t in range(spec.n_trees):
        cls = "arteriole" if t % 2 == 0 else "venule"
        for _attempt in range(spec.max_retries):
            saved = canvas.mask.copy(), canvas.centerline.copy()
            tree = _grow_tree(rng, spec, canvas)
            if tree is not None:
                break
            canvas.mask, canvas.centerline = saved
            retries += 1
        else:
            raise SynthError(
                f"cannot place tree {t} (depth {spec.depth}, arms {spec.arm_length}) on canvas {spec.canvas}"
            )
        base = len(paths)
        for pl, px, lvl, par, r in tree:
            polylines.append(pl)
            paths.append(px)
            levels.append(lvl)
            parents.append(-1 if par < 0 else base + par)
            classes.append(cls)
        retries += sum(item[4] for item in tree)

    shape = canvas.shape
    centerline = np.zeros(shape, dtype=bool)
    for px in paths:
        centerline[px[:, 0], px[:, 1]] = True
    junctions = np.zeros(shape, dtype=bool)
    for i, par in enumerate(parents):
        if par >= 0:
            r, c = paths[par][-1]
            junctions[r, c] = True
    labels = np.zeros(shape, dtype=np.int64)
    for i, px in enumerate(paths):
        labels[px[:, 0], px[:, 1]] = i + 1
    labels[junctions] = 0
    # swept brushes can pinch off single background pixels next to a joint;
    # a tree has no loops, so any enclosed background is a rasterization artifact
    mask = ndimage.binary_fill_holes(canvas.mask)
    return SynthTruth(
        mask=mask,
        centerline=centerline,
        branch_labels=labels,
        junctions=junctions,
        n_branches=len(paths),
        polylines=tuple(polylines),
        paths=tuple(paths),
        branch_class=tuple(classes),
        seed=spec.seed,
        retries=retries,
        meta={"depth": spec.depth, "n_trees": spec.n_trees},
    )


def _arm(rng, spec):
    mean, jitter = spec.arm_length
    return int(rng.integers(mean - jitter, mean + jitter + 1))


def _grow_tree(rng, spec: TreeSpec, canvas: _Canvas):
    """Grow one tree breadth-first; returns [(polyline, pixels, level, parent, retries)] or None."""
    h, w = canvas.shape
    out = []
    # trunk: start on a random interior point, heading towards the canvas center
    start = np.array([rng.uniform(0.15, 0.85) * h, rng.uniform(0.15, 0.85) * w])
    start_px = np.floor(start + 0.5)
    center = np.array([h / 2.0, w / 2.0])
    heading0 = np.arctan2(*(center - start_px)) + rng.uniform(-0.5, 0.5)
    queue = [(start_px, heading0, 0, -1)]
    first = True
    while queue:
        origin, heading, level, parent = queue.pop(0)
        width = spec.width_at(level)
        placed = None
        exempt = None
        if parent >= 0:
            # the parent and its subtree near the joint may touch the new branch
            exempt = _near(canvas.shape, origin.astype(np.int64), spec.clearance + width + 2)
        dist = canvas.clearance_map(exempt)
        for attempt in range(spec.max_retries):
            n = _arm(rng, spec)
            if first:
                pts, px, end_heading = _grow_path(rng, origin, heading, n - 1, spec.bend)
                pts = np.vstack([origin, pts])
                px = np.vstack([origin.astype(np.int64), px])
            else:
                pts, px, end_heading = _grow_path(rng, origin, heading, n, spec.bend)
            if canvas.fits(px, width, dist) and canvas.fresh(px):
                placed = (pts, px, end_heading, attempt)
                break
            if first:
                return None
        if placed is None:
            return None
        pts, px, end_heading, tries = placed
        if not first:
            pts = np.vstack([origin, pts])
            px = np.vstack([origin.astype(np.int64), px])
        first = False
        canvas.mask |= _sweep(canvas.shape, px, width)
        canvas.centerline[px[:, 0], px[:, 1]] = True
        index = len(out)
        out.append((pts, px, level, parent, tries))
        if level < spec.depth:
            half = rng.uniform(*spec.split_angle)
            skew = rng.uniform(-0.15, 0.15)
            end = px[-1].astype(np.float64)
            queue.append((end, end_heading + half + skew, level + 1, index))
            queue.append((end, end_heading - half + skew, level + 1, index))
    return out


def _near(shape, rc, radius) -> np.ndarray:
    yy, xx = np.ogrid[: shape[0], : shape[1]]
    return (yy - rc[0]) ** 2 + (xx - rc[1]) ** 2 <= radius * radius


def _owner(truth: SynthTruth) -> np.ndarray:
    path_id = np.zeros(truth.shape, dtype=np.int64)
    for i, px in enumerate(truth.paths):
        # joints belong to the parent, whose path is written first
        free = path_id[px[:, 0], px[:, 1]] == 0
        path_id[px[free, 0], px[free, 1]] = i + 1
    _, (ir, ic) = ndimage.distance_transform_edt(~truth.centerline, return_indices=True)
    return np.where(truth.mask, path_id[ir, ic], 0)


# --- perturbations ----------------------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Predicted masks derived from a truth, with the metric values they must score."""

    pred_vessel: np.ndarray
    pred_arteriole: np.ndarray
    pred_venule: np.ndarray
    expected: dict


def _nearest_centerline(truth: SynthTruth) -> tuple[np.ndarray, np.ndarray]:
    _, (ir, ic) = ndimage.distance_transform_edt(~truth.centerline, return_indices=True)
    return ir, ic


def _expected(truth: SynthTruth, pred_vessel, tau) -> dict:
    """Rates implied by which centerline pixels survive, from recorded branch labels."""
    cl = truth.centerline
    kept = cl & pred_vessel
    sizes = np.bincount(truth.branch_labels[cl], minlength=truth.n_branches + 1)[1:]
    hit = np.bincount(truth.branch_labels[kept], minlength=truth.n_branches + 1)[1:]
    detected = int(np.sum(hit >= tau * sizes))
    return {
        "tree_length_rate": 100.0 * int(kept.sum()) / int(cl.sum()),
        "branch_rate": 100.0 * detected / truth.n_branches,
        "removed_pixels": int((truth.mask & ~pred_vessel).sum()),
    }


def perturb(truth: SynthTruth, op: str = "identity", tau: float = 0.8, **kw) -> Perturbation:
    """Turn a truth into a prediction with a scripted defect.

    ``op`` is one of:

    - ``identity``: the prediction equals the truth.
    - ``gap``: cut ``length`` consecutive centerline pixels of branch
      ``branch`` (1-based, default 1) starting at ``offset`` (default centered),
      together with every mask pixel whose nearest centerline pixel was cut.
    - ``erase_branch``: remove branch ``branch`` the same way.
    - ``swap_labels``: swap arteriole and venule inside the boolean ``region``.

    The expected tree length and branch rates are read off the recorded
    branch labels; for ``swap_labels`` the expected all-pixel accuracy is the
    fraction of vessel pixels outside the region.
    """
    av = truth.ground_truth()
    pa, pv, vessel = av.arteriole.copy(), av.venule.copy(), truth.mask.copy()
    expected: dict = {}
    if op in ("gap", "erase_branch"):
        branch = int(kw.get("branch", 1))
        if not 1 <= branch <= truth.n_branches:
            raise IndexError(f"branch {branch} out of range 1..{truth.n_branches}")
        cells = truth.branch_labels == branch
        if op == "gap":
            length = int(kw["length"])
            rows, cols = _branch_pixels(truth, branch)
            if not 1 <= length <= len(rows):
                raise ValueError(f"gap length {length} outside 1..{len(rows)}")
            offset = int(kw.get("offset", (len(rows) - length) // 2))
            if not 0 <= offset <= len(rows) - length:
                raise ValueError(f"gap offset {offset} out of range")
            cells = np.zeros(truth.shape, dtype=bool)
            cells[rows[offset : offset + length], cols[offset : offset + length]] = True
        ir, ic = _nearest_centerline(truth)
        cut = truth.mask & cells[ir, ic]
        vessel &= ~cut
        pa &= ~cut
        pv &= ~cut
        expected = _expected(truth, vessel, tau)
    elif op == "swap_labels":
        region = np.asarray(kw["region"], dtype=bool)
        if region.shape != truth.shape:
            raise ValueError(f"shape mismatch: truth is {truth.shape}, region is {region.shape}")
        swap = region & truth.mask
        pa = np.where(swap, av.venule, av.arteriole)
        pv = np.where(swap, av.arteriole, av.venule)
        expected = _expected(truth, vessel, tau)
        n = int(truth.mask.sum())
        expected["acc_all"] = 100.0 * (n - int(swap.sum())) / n
    elif op == "identity":
        expected = _expected(truth, vessel, tau)
        expected.update(acc_all=100.0, f1_all=100.0 if av.arteriole.any() else None)
    else:
        raise ValueError(f"unknown perturbation {op!r}")
    return Perturbation(vessel, pa, pv, expected)


def _branch_pixels(truth: SynthTruth, branch: int):
    """Labelled pixels of a branch in path order."""
    px = truth.paths[branch - 1]
    keep = truth.branch_labels[px[:, 0], px[:, 1]] == branch
    return px[keep, 0], px[keep, 1]

