"""Dice + centerline-Dice + cost-map weighted MSE/BCE loss, with analytic gradients.

Per class the loss is::

    L = l1 * Dice + l2 * clDice + l3 * wMSE(alpha) + l4 * wBCE(alpha)

and the total sums (or averages) the arteriole, venule and vessel classes.
The weight map ``alpha`` is uniform until the vessel channel has reached the
Dice gate once, and the centerline cost map afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .raster import CLASSES, AVGroundTruth, as_mask, as_prob, check_same_shape
from .skeletal import geodesic_distance, thin

UNIFORM = "uniform"
CENTERLINE = "centerline-weighted"

# row-major window offsets; pooling ties resolve to the first entry
CROSS = ((-1, 0), (0, -1), (0, 0), (0, 1), (1, 0))
SQUARE = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1))


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.5
    lambda3: float = 0.5
    lambda4: float = 0.5

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < 0 for v in vals) or not any(v > 0 for v in vals):
            raise ValueError(f"loss weights must be >= 0 and not all zero, got {vals}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


@dataclass(frozen=True)
class SoftSkelParams:
    k: int = 5
    epsilon: float = 1e-7

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class GatePolicy:
    """Switches the cost map from uniform to centerline-weighted, once and for good."""

    dice_gate: float = 0.6
    state: str = UNIFORM

    def __post_init__(self):
        if not 0.0 < self.dice_gate < 1.0:
            raise ValueError(f"dice_gate must lie in (0, 1), got {self.dice_gate}")
        if self.state not in (UNIFORM, CENTERLINE):
            raise ValueError(f"unknown gate state {self.state!r}")

    def observe(self, vessel_dice: float) -> str:
        if self.state == UNIFORM and vessel_dice >= self.dice_gate:
            self.state = CENTERLINE
        return self.state


@dataclass(frozen=True)
class CostMap:
    alpha: np.ndarray
    provenance: str


@dataclass(frozen=True)
class ClassTarget:
    mask: np.ndarray
    skeleton: np.ndarray
    cost_map: CostMap


@dataclass
class LossReport:
    total: float
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    gate_state: str = UNIFORM

    def to_dict(self) -> dict:
        return {"total": self.total, "gate_state": self.gate_state, "per_class": self.per_class}


# --- pooling with argument tracking -------------------------------------------------


def _pool(x: np.ndarray, offsets, use_max: bool, track: bool = True):
    """Min/max pooling over ``offsets``; out-of-image neighbours are ignored.

    Returns the pooled values and, when ``track`` is set, the flat index of
    the selected source pixel (first offset wins ties).
    """
    h, w = x.shape
    padded = np.full((h + 2, w + 2), -np.inf if use_max else np.inf)
    padded[1:-1, 1:-1] = x
    views = [padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in offsets]
    if not track:
        reduce = np.maximum.reduce if use_max else np.minimum.reduce
        return reduce(views), None
    stack = np.stack(views)
    pick = np.argmax(stack, axis=0) if use_max else np.argmin(stack, axis=0)
    flat_pick = pick.ravel()
    values = stack.reshape(len(offsets), -1)[flat_pick, np.arange(h * w)].reshape(h, w)
    shift = np.array([dr * w + dc for dr, dc in offsets])
    src = np.arange(h * w) + shift[flat_pick]
    return values, src


def _unpool(grad: np.ndarray, src: np.ndarray) -> np.ndarray:
    return np.bincount(src, weights=grad.ravel(), minlength=grad.size).reshape(grad.shape)


def soft_erode(x):
    return _pool(np.asarray(x, dtype=np.float64), CROSS, False, False)[0]


def soft_dilate(x):
    return _pool(np.asarray(x, dtype=np.float64), SQUARE, True, False)[0]


def soft_open(x):
    return soft_dilate(soft_erode(x))


class _SoftSkeleton:
    """Forward pass of the iterative soft skeleton, keeping what backward needs."""

    def __init__(self, p: np.ndarray, k: int, track: bool = True):
        self.levels = []  # per level: (erode_src or None, open_e_src, open_d_src, relu_mask, delta)
        x = p
        skel = None
        self.skels = []
        for j in range(k + 1):
            x_src = None
            if j > 0:
                x, x_src = _pool(x, CROSS, False, track)
            e, e_src = _pool(x, CROSS, False, track)
            o, d_src = _pool(e, SQUARE, True, track)
            diff = x - o
            active = diff > 0
            delta = np.where(active, diff, 0.0)
            self.levels.append((x_src, e_src, d_src, active, delta))
            self.skels.append(skel)
            skel = delta if skel is None else skel + delta * (1.0 - skel)
        self.output = skel

    def backward(self, g_skel: np.ndarray) -> np.ndarray:
        g_x = np.zeros_like(g_skel)
        gs = g_skel
        for j in range(len(self.levels) - 1, -1, -1):
            x_src, e_src, d_src, active, delta = self.levels[j]
            prev = self.skels[j]
            if prev is None:
                g_delta = gs
            else:
                g_delta = gs * (1.0 - prev)
                gs = gs * (1.0 - delta)
            g_in = np.where(active, g_delta, 0.0)
            g_open = _unpool(_unpool(-g_in, d_src), e_src)
            g_level = g_x + g_in + g_open
            g_x = _unpool(g_level, x_src) if x_src is not None else g_level
        return g_x


def soft_skeleton(p, params: SoftSkelParams | None = None) -> np.ndarray:
    """Differentiable skeleton of a probability map via iterated min/max pooling."""
    params = params or SoftSkelParams()
    p = as_prob(p)
    return _SoftSkeleton(p, params.k, track=False).output


# --- individual loss terms ------------------------------------------------------------


def _dice(p, g, eps):
    num = 2.0 * np.sum(p * g) + eps
    den = np.sum(p) + np.sum(g) + eps
    value = 1.0 - num / den
    grad = -(2.0 * g * den - num) / den**2
    return value, grad


def dice_loss(p, g, epsilon: float = 1e-7) -> float:
    """``1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)``."""
    p = as_prob(p, "prediction")
    g = as_mask(g, "target").astype(np.float64)
    check_same_shape(prediction=p, target=g)
    return float(_dice(p, g, epsilon)[0])


def _cldice(p, g, gs, params: SoftSkelParams, need_grad: bool):
    eps = params.epsilon
    sk = _SoftSkeleton(p, params.k, track=need_grad)
    s = sk.output
    s_sum = s.sum()
    tp_num = np.sum(s * g) + eps
    tp_den = s_sum + eps
    tprec = tp_num / tp_den
    gs_sum = gs.sum() + eps
    tsens = (np.sum(gs * p) + eps) / gs_sum
    value = 1.0 - 2.0 * tprec * tsens / (tprec + tsens)
    if not need_grad:
        return value, None
    d_prec = -2.0 * tsens**2 / (tprec + tsens) ** 2
    d_sens = -2.0 * tprec**2 / (tprec + tsens) ** 2
    g_s = d_prec * (g * tp_den - tp_num) / tp_den**2
    grad = sk.backward(g_s) + d_sens * gs / gs_sum
    return value, grad


def cldice_loss(p, g, g_skel, params: SoftSkelParams | None = None) -> float:
    """Centerline-Dice loss: harmonic mean of skeleton precision and sensitivity, subtracted from 1."""
    params = params or SoftSkelParams()
    p = as_prob(p, "prediction")
    g = as_mask(g, "target")
    gs = as_mask(g_skel, "target skeleton")
    check_same_shape(prediction=p, target=g, skeleton=gs)
    if np.any(gs & ~g):
        raise ValueError("target skeleton must lie inside the target mask")
    return float(_cldice(p, g.astype(np.float64), gs.astype(np.float64), params, False)[0])


def _check_alpha(alpha, shape):
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != shape:
        raise ValueError(f"shape mismatch: prediction is {shape}, alpha is {alpha.shape}")
    if not np.all(alpha > 0):
        raise ValueError("cost map weights must be positive")
    return alpha


def _wmse(p, g, alpha):
    a_sum = alpha.sum()
    r = p - g
    return float(np.sum(alpha * r * r) / a_sum), 2.0 * alpha * r / a_sum


def _wbce(p, g, alpha, clamp):
    a_sum = alpha.sum()
    pc = np.clip(p, clamp, 1.0 - clamp)
    ell = -(g * np.log(pc) + (1.0 - g) * np.log(1.0 - pc))
    inside = (p > clamp) & (p < 1.0 - clamp)
    d_ell = np.where(inside, -g / pc + (1.0 - g) / (1.0 - pc), 0.0)
    return float(np.sum(alpha * ell) / a_sum), alpha * d_ell / a_sum


def weighted_mse(p, g, alpha) -> float:
    p = as_prob(p, "prediction")
    g = as_mask(g, "target").astype(np.float64)
    check_same_shape(prediction=p, target=g)
    return _wmse(p, g, _check_alpha(alpha, p.shape))[0]


def weighted_bce(p, g, alpha, clamp: float = 1e-7) -> float:
    p = as_prob(p, "prediction")
    g = as_mask(g, "target").astype(np.float64)
    check_same_shape(prediction=p, target=g)
    return _wbce(p, g, _check_alpha(alpha, p.shape), clamp)[0]


# --- cost map and targets -------------------------------------------------------------


def uniform_cost_map(shape) -> CostMap:
    return CostMap(np.ones(shape), UNIFORM)


def build_cost_map(g, g_skel, geodesic_dist, w_max: float = 2.0) -> CostMap:
    """Weights falling affinely from ``w_max`` on the centerline to 1 at the farthest
    vessel pixel; background weight is 1."""
    g = as_mask(g, "target")
    gs = as_mask(g_skel, "target skeleton")
    d = np.asarray(geodesic_dist, dtype=np.float64)
    check_same_shape(target=g, skeleton=gs, distance=d)
    if w_max < 1:
        raise ValueError(f"w_max must be >= 1, got {w_max}")
    if not np.array_equal(np.isfinite(d), g):
        raise ValueError("geodesic distance must be finite exactly on the target foreground")
    if np.any(d[gs] != 0):
        raise ValueError("geodesic distance must vanish on the skeleton")
    alpha = np.ones(g.shape)
    if g.any():
        d_max = d[g].max()
        if d_max == 0:
            alpha[g] = w_max
        else:
            alpha[g] = 1.0 + (w_max - 1.0) * (1.0 - d[g] / d_max)
    return CostMap(alpha, "geodesic")


def prepare_target(mask, w_max: float = 2.0, skeleton=None) -> ClassTarget:
    """Skeleton (``thin`` unless given) and geodesic cost map for one class mask."""
    mask = as_mask(mask)
    skel = thin(mask) if skeleton is None else as_mask(skeleton) & mask
    if mask.any():
        dist = geodesic_distance(mask, skel).dist
    else:
        dist = np.full(mask.shape, np.inf)
    return ClassTarget(mask, skel, build_cost_map(mask, skel, dist, w_max))


def prepare_targets(gt: AVGroundTruth, w_max: float = 2.0) -> dict[str, ClassTarget]:
    return {name: prepare_target(gt.channel(name), w_max) for name in CLASSES}


# --- total loss and gradient --------------------------------------------------------


def _check_inputs(preds, targets):
    missing = [c for c in CLASSES if c not in preds or c not in targets]
    if missing:
        raise KeyError(f"missing class channels: {missing}")
    out = {}
    for c in CLASSES:
        p = as_prob(preds[c], f"{c} prediction")
        check_same_shape(prediction=p, target=targets[c].mask)
        out[c] = p
    return out


def _evaluate(preds, targets, weights, params, state, clamp, reduction, need_grad):
    l1, l2, l3, l4 = weights.as_tuple()
    per_class = {}
    grads = {}
    total = 0.0
    scale = 1.0 / len(CLASSES) if reduction == "mean" else 1.0
    for c in CLASSES:
        p = preds[c]
        t = targets[c]
        g = t.mask.astype(np.float64)
        gs = t.skeleton.astype(np.float64)
        alpha = t.cost_map.alpha if state == CENTERLINE else np.ones(p.shape)
        dv, dg = _dice(p, g, params.epsilon)
        cv, cg = _cldice(p, g, gs, params, need_grad)
        mv, mg = _wmse(p, g, alpha)
        bv, bg = _wbce(p, g, alpha, clamp)
        value = l1 * dv + l2 * cv + l3 * mv + l4 * bv
        per_class[c] = {"dice": float(dv), "cldice": float(cv), "mse": mv, "bce": bv, "loss": float(value)}
        total += scale * value
        if need_grad:
            grads[c] = scale * (l1 * dg + l2 * cg + l3 * mg + l4 * bg)
    return float(total), per_class, grads


def total_loss(
    preds,
    targets,
    weights: LossWeights | None = None,
    gate: GatePolicy | None = None,
    params: SoftSkelParams | None = None,
    clamp: float = 1e-7,
    reduction: str = "sum",
) -> LossReport:
    """Loss over the three class channels.

    ``preds`` maps class name to probability map and ``targets`` maps class
    name to :class:`ClassTarget`. The gate first observes the soft Dice score
    of the vessel channel, then picks the weight map.
    """
    weights = weights or LossWeights()
    gate = gate if gate is not None else GatePolicy()
    params = params or SoftSkelParams()
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    preds = _check_inputs(preds, targets)
    vessel_score = 1.0 - _dice(preds["vessel"], targets["vessel"].mask.astype(np.float64), params.epsilon)[0]
    gate.observe(vessel_score)
    total, per_class, _ = _evaluate(preds, targets, weights, params, gate.state, clamp, reduction, False)
    return LossReport(total=total, per_class=per_class, gate_state=gate.state)


def loss_gradient(
    preds,
    targets,
    weights: LossWeights | None = None,
    gate: GatePolicy | None = None,
    params: SoftSkelParams | None = None,
    clamp: float = 1e-7,
    reduction: str = "sum",
) -> dict[str, np.ndarray]:
    """Gradient of :func:`total_loss` with respect to every prediction pixel.

    The gate is read, not updated: the weight map is piecewise constant in
    the prediction. Pooling ties route the gradient to the first window
    element in row-major order.
    """
    weights = weights or LossWeights()
    gate = gate if gate is not None else GatePolicy()
    params = params or SoftSkelParams()
    preds = _check_inputs(preds, targets)
    _, _, grads = _evaluate(preds, targets, weights, params, gate.state, clamp, reduction, True)
    return grads
