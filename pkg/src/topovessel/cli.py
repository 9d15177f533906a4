"""Command-line entry point.

Every subcommand prints a JSON run manifest (schema 1) on stdout with its
inputs, parameters, output hashes and results. Parameters come from
built-in defaults, then an optional INI config file (one section per
module), then command-line flags.

Exit codes: 0 success, 1 check or selftest failure, 2 invalid config or
inconsistent inputs, 3 missing or unreadable file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import UnidentifiedImageError

from . import acceptance, io
from .cakewavelets import CakeBank, CakeParams, build_bank, orientation_scores
from .metrics import MetricCounts, metric_counts, pool, roc
from .preprocess import PreprocessError, PreprocessParams, correct_illumination, enhance_vessels
from .raster import CLASSES, LUMINANCE, LabelDecodeError, decode_rite_label, rgb_to_gray, threshold
from .skeletal import GeodesicError, branch_decompose, geodesic_distance, junction_nodes, thin
from .synthgen import SynthError, TreeSpec, generate
from .topoloss import CENTERLINE, UNIFORM, GatePolicy, LossWeights, SoftSkelParams, prepare_targets, total_loss

log = logging.getLogger("topovessel")

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# (config section, key, parser, default, help, extra flag aliases)
PARAMS = {
    "preprocess": [
        ("preprocess", "dark_patch", int, 7, "dark-channel window half-size (px)", ()),
        ("preprocess", "atmosphere_quantile", float, 0.999, "dark-channel quantile for the bright reference", ()),
        ("preprocess", "transmission_floor", float, 0.1, "lower bound of the transmission map", ()),
        ("preprocess", "hp_sigma", float, 10.0, "Gaussian sigma of the high-pass (px)", ()),
    ],
    "cakebank": [
        ("cakewavelets", "n_orientations", int, 24, "number of orientations", ("--n",)),
        ("cakewavelets", "kernel_size", int, 7, "cropped kernel size (odd)", ("--size",)),
        ("cakewavelets", "design_size", int, 65, "frequency design grid size (odd)", ()),
        ("cakewavelets", "spline_order", int, 3, "angular B-spline order", ()),
        ("cakewavelets", "radial_decay", float, 0.9, "radial roll-off start, fraction of Nyquist", ()),
        ("cakewavelets", "dc_sigma", float, 1.5, "DC window sigma (frequency samples)", ()),
    ],
    "orientation-scores": [
        ("cakewavelets", "gray_weights", _floats, LUMINANCE, "RGB to gray weights", ()),
    ],
    "skeleton": [],
    "geodist": [
        ("skeletal", "order", int, 2, "upwind order (1 or 2)", ()),
        ("skeletal", "init_radius", float, 2.0, "exact Euclidean start radius around seeds (px)", ()),
    ],
    "loss": [
        ("topoloss", "lambdas", _floats, (1.0, 0.5, 0.5, 0.5), "loss weights l1,l2,l3,l4", ("--lambda",)),
        ("topoloss", "k", int, 5, "soft-skeleton iterations", ()),
        ("topoloss", "epsilon", float, 1e-7, "ratio smoothing", ()),
        ("topoloss", "dice_gate", float, 0.6, "vessel Dice score that switches on the cost map", ("--gate",)),
        ("topoloss", "gate_state", str, UNIFORM, f"initial gate state ({UNIFORM}|{CENTERLINE})", ()),
        ("topoloss", "w_max", float, 2.0, "cost-map weight on the centerline", ()),
        ("topoloss", "clamp", float, 1e-7, "BCE probability clamp", ()),
        ("topoloss", "reduction", str, "sum", "combine classes by sum or mean", ()),
    ],
    "grad-check": [
        ("grad-check", "seeds", int, 20, "number of random instances", ()),
    ],
    "metrics": [
        ("metrics", "tau", float, 0.8, "branch detection fraction", ()),
        ("metrics", "region", str, "both", "AV metrics to report: all, centerline or both", ()),
        ("metrics", "threshold", float, 0.5, "binarization threshold for probability maps", ()),
        ("metrics", "include_crossings", _bool, False, "keep GT crossings (as arteriole) in AV metrics", ()),
    ],
    "roc": [
        ("roc", "n_thresholds", int, 0, "subsample thresholds to this many (0 keeps all)", ()),
    ],
    "synth": [
        ("synthgen", "seed", int, 0, "random seed", ()),
        ("synthgen", "depth", int, 2, "branching depth", ()),
        ("synthgen", "width", _ints, (3, 3, 1), "vessel width per depth level", ()),
        ("synthgen", "arm_length", _ints, (18, 4), "arm length mean,jitter (px)", ()),
        ("synthgen", "bend", float, 0.08, "max heading change per step (rad)", ()),
        ("synthgen", "canvas", _ints, (96, 96), "canvas width,height", ()),
        ("synthgen", "n_trees", int, 1, "number of trees", ()),
        ("synthgen", "clearance", int, 3, "min gap between unrelated branches (px)", ()),
    ],
    "selftest": [
        ("selftest", "only", _ints, (), "comma list of criteria to run (default all)", ()),
    ],
}


def _show(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value) or "(all)"
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topovessel", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI file with one section per module")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    files = {
        "preprocess": [("--in", "src", True, "RGB fundus PNG"), ("--out", "out", True, "corrected RGB PNG"),
                       ("--enhanced", "enhanced", False, "enhanced gray PNG (default: <out>_enhanced.png)")],
        "cakebank": [("--out-dir", "out_dir", True, "output directory")],
        "orientation-scores": [("--image", "image", True, "input PNG"), ("--bank", "bank", True, "bank directory"),
                               ("--out", "out", True, "output directory")],
        "skeleton": [("--in", "src", True, "binary mask PNG"), ("--out", "out", True, "skeleton PNG"),
                     ("--labels", "labels", False, "paletted branch label PNG")],
        "geodist": [("--mask", "mask", True, "binary mask PNG"), ("--seeds", "seeds", True, "seed mask PNG"),
                    ("--out", "out", True, "distance raster (.f64)")],
        "loss": [("--pred-dir", "pred_dir", True, "directory with <class>.f64 or <class>.png"),
                 ("--gt", "gt", True, "RGB label PNG")],
        "grad-check": [],
        "metrics": [("--pred-dir", "pred_dir", True, "directory with <name>_<class>.png|.f64"),
                    ("--gt-dir", "gt_dir", True, "directory with <name>.png labels (+ optional <name>_fov.png)"),
                    ("--json", "json_out", False, "write the reports as JSON"),
                    ("--csv", "csv_out", False, "write the reports as CSV")],
        "roc": [("--pred", "pred", True, "probability raster (.f64 or PNG)"), ("--gt", "gt", True, "binary GT PNG"),
                ("--fov", "fov", False, "field-of-view PNG"), ("--csv", "csv_out", False, "threshold,fpr,tpr CSV")],
        "synth": [("--out-dir", "out_dir", True, "output directory")],
        "selftest": [],
    }
    for name, params in PARAMS.items():
        p = sub.add_parser(name, help=f"{name} subcommand")
        common(p)
        for flag, dest, required, help_text in files[name]:
            p.add_argument(flag, dest=dest, required=required, help=help_text)
        for section, key, _, default, help_text, aliases in params:
            flags = ["--" + key.replace("_", "-"), *aliases]
            p.add_argument(*flags, dest=key, default=None, help=f"{help_text} [{section}] (default: {_show(default)})")
    return parser


def resolve(command: str, args, config: configparser.ConfigParser | None) -> dict:
    """Defaults, overridden by the config file, overridden by flags; parse errors name the field."""
    out = {}
    for section, key, parse, default, _, _ in PARAMS[command]:
        raw = getattr(args, key, None)
        source = "--" + key.replace("_", "-")
        if raw is None and config is not None and config.has_option(section, key):
            raw = config.get(section, key)
            source = f"[{section}] {key}"
        if raw is None:
            out[key] = default
            continue
        try:
            out[key] = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: cannot parse {raw!r} ({exc})") from None
    return out


def load_config(path) -> configparser.ConfigParser:
    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = configparser.ConfigParser()
    try:
        cfg.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {}
    for params in PARAMS.values():
        for section, key, *_ in params:
            known.setdefault(section, set()).add(key)
    for section in cfg.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in cfg.options(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
    return cfg


def _check(field: str, fn, *a, **kw):
    """Build a parameter record, turning validation errors into config errors naming ``field``."""
    try:
        return fn(*a, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{field}: {exc}") from None


# --- manifest helpers -----------------------------------------------------------------


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _entry(path) -> dict:
    return {"path": str(path), "sha256": sha256(path)}


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def _outputs(paths) -> list[dict]:
    return [_entry(p) for p in paths]


def _pmap(fn, items, jobs: int):
    """Ordered map, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


# --- subcommands ----------------------------------------------------------------------


def cmd_preprocess(args, p):
    params = _check("preprocess", PreprocessParams, **p)
    rgb = io.read_png(args.src)
    if rgb.ndim != 3:
        raise ConfigError(f"--in: expected an RGB image, got shape {rgb.shape}")
    corrected = correct_illumination(rgb, params)
    enhanced = enhance_vessels(rgb_to_gray(corrected), params.hp_sigma)
    out = Path(args.out)
    enh = Path(args.enhanced) if args.enhanced else out.with_name(out.stem + "_enhanced.png")
    io.write_png(out, corrected)
    io.write_png(enh, enhanced)
    return {"inputs": [_entry(args.src)], "outputs": _outputs([out, enh]), "results": {}}


def _bank_params(p) -> CakeParams:
    return _check("cakewavelets", CakeParams, **p)


def cmd_cakebank(args, p):
    params = _bank_params(p)
    bank = build_bank(params)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, k in enumerate(bank.kernels):
        raw = out / f"kernel_{i:02d}.f64"
        io.write_raw(raw, k)
        lo, hi = k.min(), k.max()
        png = out / f"kernel_{i:02d}.png"
        io.write_png(png, (k - lo) / (hi - lo) if hi > lo else np.full(k.shape, 0.5))
        written += [raw, raw.with_name(raw.name + ".json"), png]
    meta = out / "bank.json"
    meta.write_text(dumps({"params": asdict(params), "thetas": bank.thetas.tolist()}) + "\n")
    written.append(meta)
    return {"inputs": [], "outputs": _outputs(written), "results": {"n_kernels": len(bank.kernels)}}


def cmd_orientation_scores(args, p):
    weights = p["gray_weights"]
    bank_dir = Path(args.bank)
    meta = json.loads((bank_dir / "bank.json").read_text())
    n = len(meta["thetas"])
    kernels = [io.read_raw(bank_dir / f"kernel_{i:02d}.f64") for i in range(n)]
    img = io.read_png(args.image)
    gray = _check("gray_weights", rgb_to_gray, img, weights) if img.ndim == 3 else img
    bank = CakeBank(_bank_params(meta["params"]), np.asarray(meta["thetas"]), None, np.stack(kernels), None, None)
    scores = orientation_scores(gray, bank)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, s in enumerate(scores):
        raw = out / f"score_{i:02d}.f64"
        io.write_raw(raw, s)
        written += [raw, raw.with_name(raw.name + ".json")]
    inputs = [_entry(args.image), _entry(bank_dir / "bank.json")]
    return {"inputs": inputs, "outputs": _outputs(written), "results": {"n_orientations": n}}


def _read_mask(path):
    """Binary mask from a PNG: any channel at or above half intensity is foreground."""
    img = io.read_png(path)
    if img.ndim == 3:
        img = img.max(axis=2)
    return img >= 0.5


def cmd_skeleton(args, p):
    mask = _read_mask(args.src)
    skel = thin(mask)
    branches = branch_decompose(skel)
    io.write_png(args.out, skel)
    written = [args.out]
    if args.labels:
        io.write_label_png(args.labels, branches.labels)
        written.append(args.labels)
    results = {
        "skeleton_pixels": int(skel.sum()),
        "n_branches": branches.n_branches,
        "junction_nodes": junction_nodes(branches),
        "endpoints": int(branches.endpoints.sum()),
    }
    return {"inputs": [_entry(args.src)], "outputs": _outputs(written), "results": results}


def cmd_geodist(args, p):
    if p["order"] not in (1, 2):
        raise ConfigError(f"order: must be 1 or 2, got {p['order']}")
    mask = _read_mask(args.mask)
    seeds = _read_mask(args.seeds)
    if mask.shape != seeds.shape:
        raise ConfigError(f"shape mismatch: mask is {mask.shape}, seeds is {seeds.shape}")
    field = geodesic_distance(mask, seeds, order=p["order"], init_radius=p["init_radius"])
    io.write_raw(args.out, field.dist)
    reached = field.dist[field.reached]
    results = {"reached": int(field.reached.sum()), "max_distance": float(reached.max())}
    out = Path(args.out)
    return {
        "inputs": [_entry(args.mask), _entry(args.seeds)],
        "outputs": _outputs([out, out.with_name(out.name + ".json")]),
        "results": results,
    }


def _find_raster(directory: Path, stem: str) -> Path:
    for ext in (".f64", ".png"):
        path = directory / (stem + ext)
        if path.is_file():
            return path
    raise FileNotFoundError(f"missing prediction {directory / stem}.f64 or .png")


def cmd_loss(args, p):
    if len(p["lambdas"]) != 4:
        raise ConfigError(f"lambdas: expected 4 values, got {len(p['lambdas'])}")
    weights = _check("lambdas", LossWeights, *p["lambdas"])
    params = _check("k/epsilon", SoftSkelParams, k=p["k"], epsilon=p["epsilon"])
    gate = _check("dice_gate/gate_state", GatePolicy, dice_gate=p["dice_gate"], state=p["gate_state"])
    if p["reduction"] not in ("sum", "mean"):
        raise ConfigError(f"reduction: must be sum or mean, got {p['reduction']!r}")
    if p["w_max"] < 1:
        raise ConfigError(f"w_max: must be >= 1, got {p['w_max']}")
    gt = decode_rite_label(io.read_label_png(args.gt))
    pred_dir = Path(args.pred_dir)
    paths = {c: _find_raster(pred_dir, c) for c in CLASSES}
    preds = {c: io.read_raster(paths[c]) for c in CLASSES}
    for c in CLASSES:
        if preds[c].shape != gt.shape:
            raise ConfigError(f"shape mismatch: ground truth is {gt.shape}, {c} prediction is {preds[c].shape}")
    targets = prepare_targets(gt, p["w_max"])
    report = total_loss(preds, targets, weights, gate, params, clamp=p["clamp"], reduction=p["reduction"])
    inputs = [_entry(args.gt)] + [_entry(paths[c]) for c in CLASSES]
    return {"inputs": inputs, "outputs": [], "results": report.to_dict()}


def _grad_seed(seed: int) -> float:
    state = CENTERLINE if seed % 2 == 0 else UNIFORM
    return acceptance.gradient_error(seed, state)


def cmd_grad_check(args, p):
    if p["seeds"] < 1:
        raise ConfigError(f"seeds: must be >= 1, got {p['seeds']}")
    errors = _pmap(_grad_seed, range(p["seeds"]), args.jobs)
    worst = max(errors)
    results = {"max_rel_error": worst, "per_seed": errors, "tolerance": 1e-4, "passed": worst <= 1e-4}
    return {"inputs": [], "outputs": [], "results": results, "exit": EXIT_OK if worst <= 1e-4 else EXIT_FAIL}


def _metrics_job(job):
    name, gt_path, fov_path, pred_paths, p = job
    gt = decode_rite_label(io.read_label_png(gt_path), fov=_read_mask(fov_path) if fov_path else None)
    preds = {}
    for c in CLASSES:
        raw = io.read_raster(pred_paths[c])
        if raw.shape != gt.shape:
            raise ConfigError(f"{name}: shape mismatch: ground truth is {gt.shape}, {c} prediction is {raw.shape}")
        preds[c] = threshold(raw, p["threshold"]) & gt.fov
    centerline = thin(gt.vessel)
    counts = metric_counts(
        preds["arteriole"], preds["venule"], preds["vessel"], gt, centerline, branch_decompose(centerline),
        p["tau"], p["include_crossings"],
    )
    return name, counts


def _report_dict(counts: MetricCounts, region: str) -> dict:
    d = counts.report().to_dict()
    if region == "all":
        d.pop("f1_centerline"), d.pop("acc_centerline")
    elif region == "centerline":
        d.pop("f1_all"), d.pop("acc_all")
    return d


CSV_FIELDS = ("name", "f1_all", "acc_all", "f1_centerline", "acc_centerline", "branch_rate", "tree_length_rate", "vessel_rate")


def cmd_metrics(args, p):
    if p["region"] not in ("all", "centerline", "both"):
        raise ConfigError(f"region: must be all, centerline or both, got {p['region']!r}")
    if not 0 < p["tau"] <= 1:
        raise ConfigError(f"tau: must lie in (0, 1], got {p['tau']}")
    if not 0 <= p["threshold"] <= 1:
        raise ConfigError(f"threshold: must lie in [0, 1], got {p['threshold']}")
    gt_dir, pred_dir = Path(args.gt_dir), Path(args.pred_dir)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_dir}")
    if not pred_dir.is_dir():
        raise FileNotFoundError(f"prediction directory not found: {pred_dir}")
    names = sorted(f.stem for f in gt_dir.glob("*.png") if not f.stem.endswith("_fov"))
    if not names:
        raise FileNotFoundError(f"no ground-truth PNGs in {gt_dir}")
    jobs, inputs = [], []
    for name in names:
        gt_path = gt_dir / f"{name}.png"
        fov = gt_dir / f"{name}_fov.png"
        fov_path = fov if fov.is_file() else None
        pred_paths = {c: _find_raster(pred_dir, f"{name}_{c}") for c in CLASSES}
        jobs.append((name, gt_path, fov_path, pred_paths, p))
        inputs += [_entry(gt_path)] + ([_entry(fov_path)] if fov_path else []) + [_entry(pred_paths[c]) for c in CLASSES]
    results = dict(_pmap(_metrics_job, jobs, args.jobs))
    per_image = [{"name": n, **_report_dict(results[n], p["region"])} for n in names]
    pooled = {"name": "pooled", **_report_dict(pool(results[n] for n in names), p["region"])}
    outputs = []
    if args.json_out:
        Path(args.json_out).write_text(dumps({"images": per_image, "pooled": pooled}) + "\n")
        outputs.append(args.json_out)
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            fields = [k for k in CSV_FIELDS if k in pooled]
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in per_image + [pooled]:
                writer.writerow({k: "" if row[k] is None else row[k] for k in fields})
        outputs.append(args.csv_out)
    return {"inputs": inputs, "outputs": _outputs(outputs), "results": {"images": per_image, "pooled": pooled}}


def cmd_roc(args, p):
    if p["n_thresholds"] < 0:
        raise ConfigError(f"n_thresholds: must be >= 0, got {p['n_thresholds']}")
    pred = io.read_raster(args.pred)
    gt = _read_mask(args.gt)
    fov = _read_mask(args.fov) if args.fov else None
    shapes = {"prediction": pred.shape, "ground truth": gt.shape}
    if fov is not None:
        shapes["fov"] = fov.shape
    if len(set(shapes.values())) > 1:
        raise ConfigError("shape mismatch: " + ", ".join(f"{k} is {v}" for k, v in shapes.items()))
    curve = roc(pred, gt, fov, p["n_thresholds"] or None)
    outputs = []
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
                writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])
            writer.writerow(["auc", "" if curve.auc is None else repr(curve.auc)])
        outputs.append(args.csv_out)
    inputs = [_entry(args.pred), _entry(args.gt)] + ([_entry(args.fov)] if args.fov else [])
    results = {"auc": curve.auc, "n_pos": curve.n_pos, "n_neg": curve.n_neg, "n_points": len(curve.thresholds)}
    return {"inputs": inputs, "outputs": _outputs(outputs), "results": results}


def cmd_synth(args, p):
    if len(p["arm_length"]) != 2 or len(p["canvas"]) != 2:
        raise ConfigError("arm_length and canvas take two comma-separated integers")
    width = p["width"][0] if len(p["width"]) == 1 else p["width"]
    spec = _check(
        "synthgen", TreeSpec, seed=p["seed"], depth=p["depth"], arm_length=p["arm_length"], width=width,
        bend=p["bend"], canvas=p["canvas"], n_trees=p["n_trees"], clearance=p["clearance"],
    )
    truth = generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "mask.png", out / "centerline.png", out / "labels.png", out / "truth.json"]
    io.write_png(paths[0], truth.mask)
    io.write_png(paths[1], truth.centerline)
    io.write_label_png(paths[2], truth.branch_labels)
    paths[3].write_text(dumps(truth.to_json()) + "\n")
    results = {"n_branches": truth.n_branches, "seed": truth.seed, "retries": truth.retries}
    return {"inputs": [], "outputs": _outputs(paths), "results": results}


def _run_numbered(number: int) -> dict:
    r = acceptance.run_check(number)
    return {"record": r.to_dict(), "line": r.line(), "within_budget": r.within_budget}


def cmd_selftest(args, p):
    numbers = list(p["only"]) or sorted(acceptance.CHECKS)
    unknown = [n for n in numbers if n not in acceptance.CHECKS]
    if unknown:
        raise ConfigError(f"only: unknown criteria {unknown}")
    done = _pmap(_run_numbered, numbers, args.jobs)
    for d in done:
        print(d["line"], file=sys.stderr)
        if not d["within_budget"]:
            print(f"  criterion {d['record']['number']} exceeded its runtime budget", file=sys.stderr)
    records = [d["record"] for d in done]
    ok = all(r["passed"] for r in records)
    results = {"criteria": records, "passed": sum(r["passed"] for r in records), "total": len(records)}
    return {"inputs": [], "outputs": [], "results": results, "exit": EXIT_OK if ok else EXIT_FAIL}


COMMANDS = {
    "preprocess": cmd_preprocess,
    "cakebank": cmd_cakebank,
    "orientation-scores": cmd_orientation_scores,
    "skeleton": cmd_skeleton,
    "geodist": cmd_geodist,
    "loss": cmd_loss,
    "grad-check": cmd_grad_check,
    "metrics": cmd_metrics,
    "roc": cmd_roc,
    "synth": cmd_synth,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError(f"jobs: must be >= 1, got {args.jobs}")
        config = load_config(args.config) if args.config else None
        params = resolve(args.command, args, config)
        log.info("running %s", args.command)
        result = COMMANDS[args.command](args, params)
    except (ConfigError, LabelDecodeError, PreprocessError, GeodesicError, SynthError, ValueError) as exc:
        print(f"topovessel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        print(f"topovessel {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    code = result.pop("exit", EXIT_OK)
    manifest = {"schema": SCHEMA, "command": args.command, "params": params, "status": "ok" if code == 0 else "failed", **result}
    print(dumps(manifest))
    return code


if __name__ == "__main__":
    sys.exit(main())
