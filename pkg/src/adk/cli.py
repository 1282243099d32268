"""Command-line front end binding the pipeline together.

Subcommands: tile, stitch, convert, split, pseudo-label, augment,
anchors, eval, stats, lsk, serve. Exit codes: 0 success, 1 usage error,
2 data error (unreadable files, malformed records, failed invariants).

Option precedence is flag > config > built-in default; ``--config``
points at a flat key=value file. The built-in defaults reproduce the
standard capture pipeline: 640 window, 630 stride, confidence 0.25,
NMS IoU 0.45, split ratios 8:1:1. Set ADK_LOG=debug|info|warn|error to
control verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

log = logging.getLogger("adk")

_IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
# generous fallback so label files can be read without a class list
_ANON_CLASSES = tuple(str(i) for i in range(1000))


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data
    errors, so usage problems are remapped to exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _setup_logging() -> None:
    wanted = os.environ.get("ADK_LOG", "warn").lower()
    level = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }.get(wanted, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_config(path: Path) -> dict:
    """Flat key = value file; ints, floats, true/false and quoted or bare
    strings. Comments start with #."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(path.read_text("utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if value.startswith(('"', "'")) and value.endswith(value[0]) and len(value) >= 2:
            values[key] = value[1:-1]
        elif value.lower() in ("true", "false"):
            values[key] = value.lower() == "true"
        else:
            try:
                values[key] = int(value)
            except ValueError:
                try:
                    values[key] = float(value)
                except ValueError:
                    values[key] = value
    return values


def _resolve(args: argparse.Namespace, defaults: dict) -> None:
    """Fill in unset options from --config, then from built-in defaults."""
    config = {}
    if getattr(args, "config", None) is not None:
        config = _parse_config(Path(args.config))
        unknown = set(config) - set(defaults)
        if unknown:
            log.warning("config keys not used by this subcommand: %s", ", ".join(sorted(unknown)))
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))


def _classes(args) -> tuple[str, ...]:
    if getattr(args, "classes", None):
        return tuple(c.strip() for c in args.classes.split(",") if c.strip())
    if getattr(args, "classes_file", None):
        lines = Path(args.classes_file).read_text("utf-8").splitlines()
        return tuple(line.strip() for line in lines if line.strip())
    return _ANON_CLASSES


def _load_image(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im)


def _save_image(path: Path, arr: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(arr).save(path)


def _find_image(root: Path, stem: str) -> Path:
    for ext in _IMAGE_EXTS:
        p = root / f"{stem}{ext}"
        if p.is_file():
            return p
    raise FileNotFoundError(f"no image for id {stem!r} under {root}")


def _image_size(args, image_id: str) -> tuple[int, int]:
    if getattr(args, "manifest", None):
        from .labelio import manifest_from_json

        manifest = manifest_from_json(Path(args.manifest).read_text("utf-8"))
        return (lambda im: (im.width, im.height))(manifest.image(image_id))
    return int(args.width), int(args.height)


def _jobs(args) -> int:
    return max(1, int(args.jobs))


# --- subcommands -------------------------------------------------------------


def cmd_tile(args) -> int:
    from .labelio import read_yolo_file, write_yolo_file
    from .tiling import crop_tile, plan_tiles, remap_annotations

    image_path = Path(getattr(args, "in"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image = _load_image(image_path)
    height, width = image.shape[:2]
    stem = image_path.stem
    plan = plan_tiles(
        width, height, (args.win, args.win), (args.stride, args.stride), args.policy, image_id=stem
    )
    (out_dir / f"{stem}_plan.json").write_text(plan.to_json(), encoding="utf-8")
    anns = None
    if args.labels:
        anns = read_yolo_file(args.labels, width, height, _classes(args))

    def one(row_col):
        row, col = row_col
        origin = plan.origin_of(row, col)
        tile_id = plan.tile_id(row, col)
        _save_image(out_dir / f"{tile_id}.png", crop_tile(image, origin, plan.window))
        if anns is not None:
            local = remap_annotations(anns, origin, plan.window, args.min_vis)
            write_yolo_file(out_dir / f"{tile_id}.txt", local, args.win, args.win)

    cells = [(r, c) for r in range(len(plan.y_offsets)) for c in range(len(plan.x_offsets))]
    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        list(pool.map(one, cells))
    print(json.dumps({"image": stem, "tiles": len(plan), "out": str(out_dir)}))
    return 0


def cmd_stitch(args) -> int:
    from .pseudolabel import read_detections_jsonl, write_detections_jsonl
    from .tiling import TilePlan, stitch_detections

    plan = TilePlan.from_json(Path(args.plan).read_text("utf-8"))
    dets_by_tile = read_detections_jsonl(args.dets)
    per_tile = []
    seen = set()
    for row in range(len(plan.y_offsets)):
        for col in range(len(plan.x_offsets)):
            tile_id = plan.tile_id(row, col)
            seen.add(tile_id)
            if tile_id in dets_by_tile:
                per_tile.append((plan.origin_of(row, col), dets_by_tile[tile_id]))
    ignored = sorted(set(dets_by_tile) - seen)
    if ignored:
        log.warning("%d detection image ids not in the tile plan, ignored", len(ignored))
    stitched = stitch_detections(per_tile, nms_iou=args.nms, class_agnostic=bool(args.agnostic))
    write_detections_jsonl(args.out, {plan.image_id: stitched})
    print(json.dumps({"image": plan.image_id, "detections": len(stitched), "out": args.out}))
    return 0


_READ_EXT = {"yolo": ".txt", "voc": ".xml", "labelme": ".json"}


def cmd_convert(args) -> int:
    from .labelio import (
        labelme_image_size,
        read_labelme,
        read_voc,
        read_yolo,
        voc_image_size,
        write_labelme,
        write_voc,
        write_yolo,
    )

    src_fmt, dst_fmt = args.src_format, args.dst_format
    classes = _classes(args)
    in_path = Path(getattr(args, "in"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = (
        sorted(in_path.glob(f"*{_READ_EXT[src_fmt]}")) if in_path.is_dir() else [in_path]
    )
    if not files:
        raise ValueError(f"no {_READ_EXT[src_fmt]} files under {in_path}")
    converted = skipped_shapes = 0
    for path in files:
        text = path.read_text("utf-8")
        stem = path.stem
        if src_fmt == "yolo":
            width, height = _image_size(args, stem)
            anns = read_yolo(text, width, height, classes)
        elif src_fmt == "voc":
            width, height = voc_image_size(text)
            anns = read_voc(text, classes)
        else:
            width, height = labelme_image_size(text)
            anns, skipped = read_labelme(text, classes)
            skipped_shapes += skipped
        if dst_fmt == "yolo":
            rendered = write_yolo(anns, width, height)
        elif dst_fmt == "voc":
            rendered = write_voc(anns, classes, f"{stem}.png", width, height)
        else:
            rendered = write_labelme(anns, classes, f"{stem}.png", width, height)
        (out_dir / f"{stem}{_READ_EXT[dst_fmt]}").write_text(rendered, encoding="utf-8")
        converted += 1
    summary = {"files": converted, "out": str(out_dir)}
    if skipped_shapes:
        summary["skipped_non_rectangles"] = skipped_shapes
    print(json.dumps(summary))
    return 0


def cmd_split(args) -> int:
    from .labelio import manifest_from_json, manifest_to_json, split_dataset

    parts = str(args.ratios).split(":")
    if len(parts) != 3:
        raise ValueError(f"ratios must look like 8:1:1, got {args.ratios!r}")
    ratios = tuple(float(p) for p in parts)
    manifest = manifest_from_json(Path(args.manifest).read_text("utf-8"))
    result = split_dataset(manifest, ratios, seed=args.seed, group_by_source=bool(args.group_tiles))
    Path(args.out).write_text(manifest_to_json(result), encoding="utf-8")
    counts = {}
    for im in result.images:
        counts[im.split.value] = counts.get(im.split.value, 0) + 1
    print(json.dumps({"out": args.out, "counts": counts}, sort_keys=True))
    return 0


def cmd_pseudo_label(args) -> int:
    from .labelio import write_yolo_file
    from .pseudolabel import PseudoLabelConfig, propose_labels, read_detections_jsonl

    cfg = PseudoLabelConfig(
        confidence_threshold=args.conf, nms_iou=args.nms, class_agnostic=bool(args.agnostic)
    )
    dets_by_image = read_detections_jsonl(args.dets)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = 0
    for image_id in sorted(dets_by_image):
        width, height = _image_size(args, image_id)
        proposals = propose_labels(dets_by_image[image_id], cfg)
        write_yolo_file(out_dir / f"{image_id}.txt", proposals, width, height)
        total += len(proposals)
    print(json.dumps({"images": len(dets_by_image), "proposals": total, "out": str(out_dir)}))
    return 0


def cmd_augment(args) -> int:
    from .augment import apply_spec, oversample_plan, plan_from_jsonl, plan_to_jsonl
    from .labelio import read_yolo_file, write_yolo_file

    images_dir = Path(args.images)
    labels_dir = Path(args.labels)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = _classes(args)

    if args.plan and Path(args.plan).is_file():
        plan = plan_from_jsonl(Path(args.plan).read_text("utf-8"))
    else:
        if args.target is None:
            raise ValueError("--target is required unless --plan names an existing file")
        class_images: dict[str, list[str]] = {}
        for txt in sorted(labels_dir.glob("*.txt")):
            stem = txt.stem
            width, height = _image_size(args, stem)
            anns = read_yolo_file(txt, width, height, classes)
            for name in {classes[a.class_id] for a in anns}:
                class_images.setdefault(name, []).append(stem)
        plan = oversample_plan(class_images, args.target, seed=args.seed)
        plan_path = Path(args.plan) if args.plan else out_dir / "plan.jsonl"
        plan_path.write_text(plan_to_jsonl(plan), encoding="utf-8")

    def one(item):
        index, (src_id, spec) = item
        width, height = _image_size(args, src_id)
        image = _load_image(_find_image(images_dir, src_id))
        src_txt = labels_dir / f"{src_id}.txt"
        anns = read_yolo_file(src_txt, width, height, classes) if src_txt.is_file() else []
        new_image, new_anns = apply_spec(image, anns, spec)
        out_id = f"{src_id}_aug{index:05d}"
        _save_image(out_dir / f"{out_id}.png", new_image)
        write_yolo_file(out_dir / f"{out_id}.txt", new_anns, width, height)

    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        list(pool.map(one, enumerate(plan)))
    print(json.dumps({"augmented": len(plan), "out": str(out_dir)}))
    return 0


def cmd_anchors(args) -> int:
    from .anchors import kmeans_anchors
    from .labelio import read_yolo_file

    labels_dir = Path(args.labels)
    classes = _classes(args)
    dims: list[tuple[float, float]] = []
    zero = 0
    for txt in sorted(labels_dir.glob("*.txt")):
        width, height = _image_size(args, txt.stem)
        for a in read_yolo_file(txt, width, height, classes):
            if a.bbox.width > 0 and a.bbox.height > 0:
                dims.append((a.bbox.width, a.bbox.height))
            else:
                zero += 1
    if zero:
        log.warning("ignored %d zero-area boxes", zero)
    if not dims:
        raise ValueError(f"no boxes found under {labels_dir}")
    result = kmeans_anchors(np.array(dims), k=args.k, seed=args.seed, metric=args.metric)
    payload = json.dumps(
        {
            "anchors": [[round(w, 2), round(h, 2)] for w, h in result.anchors],
            "fitness": round(result.fitness, 6),
            "iterations": result.iterations,
            "boxes": len(dims),
        },
        sort_keys=True,
    )
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def cmd_eval(args) -> int:
    from .evalkit import evaluate, report_table, report_to_json
    from .labelio import read_yolo_file
    from .pseudolabel import read_detections_jsonl

    classes = _classes(args)
    gt_dir = Path(args.gt)
    txts = sorted(gt_dir.glob("*.txt"))
    if not txts:
        raise ValueError(f"no ground-truth label files under {gt_dir}")

    def load(txt: Path):
        width, height = _image_size(args, txt.stem)
        return txt.stem, read_yolo_file(txt, width, height, classes)

    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        gts_by_image = dict(pool.map(load, txts))
    preds_by_image = read_detections_jsonl(args.dets)
    ids = {c for anns in gts_by_image.values() for c in (a.class_id for a in anns)}
    ids |= {d.class_id for dets in preds_by_image.values() for d in dets}
    num_classes = max(ids) + 1 if ids else 1
    report = evaluate(
        preds_by_image, gts_by_image, num_classes, conf_thr=args.conf, iou_thr=args.iou
    )
    names = classes[:num_classes] if classes is not _ANON_CLASSES else None
    if args.json:
        Path(args.json).write_text(report_to_json(report, names), encoding="utf-8")
    print(report_table(report, names), end="")
    return 0


def cmd_stats(args) -> int:
    from .evalkit import dataset_stats, stats_to_json
    from .labelio import manifest_from_json, read_yolo_file

    manifest = manifest_from_json(Path(args.manifest).read_text("utf-8"))
    labels_dir = Path(args.labels)
    labels = {}
    for im in manifest.images:
        txt = labels_dir / f"{im.id}.txt"
        if txt.is_file():
            labels[im.id] = read_yolo_file(txt, im.width, im.height, manifest.classes)
    stats = dataset_stats(manifest, labels)
    print(stats_to_json(stats), end="")
    return 0


def cmd_lsk(args) -> int:
    from .lsk import (
        conv2d_direct,
        lsk_forward,
        random_lsk_params,
        read_lsk_params,
        read_tensor4,
        write_lsk_params,
        write_tensor4,
    )

    if args.init_channels is not None:
        params = random_lsk_params(args.init_channels, seed=args.seed)
        with open(args.params, "wb") as fh:
            write_lsk_params(fh, params)
        print(json.dumps({"params": args.params, "channels": args.init_channels}))
        return 0
    if not getattr(args, "in") or not args.out:
        raise ValueError("forward mode needs --params, --in and --out")
    with open(args.params, "rb") as fh:
        params = read_lsk_params(fh)
    with open(getattr(args, "in"), "rb") as fh:
        x = read_tensor4(fh)
    conv = conv2d_direct if args.direct else None
    out = lsk_forward(x, params, conv) if conv else lsk_forward(x, params)
    with open(args.out, "wb") as fh:
        write_tensor4(fh, out)
    digest = hashlib.sha256(Path(args.out).read_bytes()).hexdigest()
    print(json.dumps({"shape": list(out.shape), "sha256": digest, "out": args.out}))
    return 0


def cmd_serve(args) -> int:
    from .review import serve

    ui = Path(args.ui) if args.ui else None
    if ui is None:
        candidate = Path("frontend") / "dist"
        if candidate.is_dir():
            ui = candidate
    serve(Path(args.root), port=args.port, host=args.host, ui_dir=ui)
    return 0


# --- wiring -------------------------------------------------------------------

_DEFAULTS = {
    "tile": {"win": 640, "stride": 630, "policy": "clamp", "min_vis": 0.25,
             "out": "tiles", "jobs": os.cpu_count() or 1},
    "stitch": {"nms": 0.45, "agnostic": False},
    "convert": {"width": 640, "height": 640},
    "split": {"ratios": "8:1:1", "seed": 0, "group_tiles": False},
    "pseudo-label": {"conf": 0.25, "nms": 0.45, "agnostic": False, "width": 640, "height": 640,
                     "out": "labels"},
    "augment": {"seed": 0, "target": None, "plan": None, "width": 640, "height": 640,
                "jobs": os.cpu_count() or 1},
    "anchors": {"k": 9, "seed": 0, "metric": "iou", "width": 640, "height": 640, "out": None},
    "eval": {"iou": 0.5, "conf": 0.25, "width": 640, "height": 640, "json": None,
             "jobs": os.cpu_count() or 1},
    "stats": {},
    "lsk": {"seed": 0, "direct": False, "init_channels": None, "out": None},
    "serve": {"port": 8000, "host": "127.0.0.1", "ui": None},
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="adk", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name: str, func, help_text: str) -> _Parser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", type=Path, help="key = value file merged under explicit flags")
        return p

    def opt(p, *names, **kw):
        kw.setdefault("default", None)
        p.add_argument(*names, **kw)

    p = add("tile", cmd_tile, "cut an image into overlapping windows")
    p.add_argument("--in", required=True, help="input image")
    opt(p, "--labels", help="YOLO txt of the input image; tiles get remapped boxes")
    opt(p, "--classes")
    opt(p, "--classes-file")
    opt(p, "--win", type=int)
    opt(p, "--stride", type=int)
    opt(p, "--policy", choices=["clamp", "drop_partial"])
    opt(p, "--min-vis", dest="min_vis", type=float)
    opt(p, "--out")
    opt(p, "--jobs", type=int)

    p = add("stitch", cmd_stitch, "map tile detections back to image coordinates")
    p.add_argument("--plan", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True)
    opt(p, "--nms", type=float)
    opt(p, "--agnostic", action=argparse.BooleanOptionalAction)

    p = add("convert", cmd_convert, "convert label files between formats")
    p.add_argument("--from", dest="src_format", required=True, choices=["yolo", "voc", "labelme"])
    p.add_argument("--to", dest="dst_format", required=True, choices=["yolo", "voc", "labelme"])
    p.add_argument("--in", required=True, help="label file or directory")
    p.add_argument("--out", required=True)
    opt(p, "--classes")
    opt(p, "--classes-file")
    opt(p, "--manifest")
    opt(p, "--width", type=int)
    opt(p, "--height", type=int)

    p = add("split", cmd_split, "assign train/val/test splits in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    opt(p, "--ratios")
    opt(p, "--seed", type=int)
    opt(p, "--group-tiles", dest="group_tiles", action=argparse.BooleanOptionalAction)

    p = add("pseudo-label", cmd_pseudo_label, "turn detections into proposed label files")
    p.add_argument("--dets", required=True)
    opt(p, "--out")
    opt(p, "--conf", type=float)
    opt(p, "--nms", type=float)
    opt(p, "--agnostic", action=argparse.BooleanOptionalAction)
    opt(p, "--manifest")
    opt(p, "--width", type=int)
    opt(p, "--height", type=int)

    p = add("augment", cmd_augment, "oversample deficient classes with augmented copies")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    opt(p, "--classes")
    opt(p, "--classes-file")
    opt(p, "--target", type=int)
    opt(p, "--seed", type=int)
    opt(p, "--plan", help="plan file: reused when present, written otherwise")
    opt(p, "--manifest")
    opt(p, "--width", type=int)
    opt(p, "--height", type=int)
    opt(p, "--jobs", type=int)

    p = add("anchors", cmd_anchors, "cluster box shapes into anchors")
    p.add_argument("--labels", required=True)
    opt(p, "--classes")
    opt(p, "--classes-file")
    opt(p, "-k", dest="k", type=int)
    opt(p, "--seed", type=int)
    opt(p, "--metric", choices=["iou", "euclidean"])
    opt(p, "--manifest")
    opt(p, "--width", type=int)
    opt(p, "--height", type=int)
    opt(p, "--out")

    p = add("eval", cmd_eval, "score detections against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--dets", required=True)
    opt(p, "--iou", type=float)
    opt(p, "--conf", type=float)
    opt(p, "--classes")
    opt(p, "--classes-file")
    opt(p, "--manifest")
    opt(p, "--width", type=int)
    opt(p, "--height", type=int)
    opt(p, "--json", help="also write the full report to this file")
    opt(p, "--jobs", type=int)

    p = add("stats", cmd_stats, "dataset statistics table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True)

    p = add("lsk", cmd_lsk, "run the attention block on a tensor file")
    p.add_argument("--params", required=True)
    opt(p, "--in")
    opt(p, "--out")
    opt(p, "--direct", action=argparse.BooleanOptionalAction)
    opt(p, "--init-channels", dest="init_channels", type=int,
        help="write fresh random parameters for this channel width and exit")
    opt(p, "--seed", type=int)

    p = add("serve", cmd_serve, "start the label review service")
    p.add_argument("--root", required=True)
    opt(p, "--port", type=int)
    opt(p, "--host")
    opt(p, "--ui", help="directory with the built review UI (default: ./frontend/dist)")

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    _resolve(args, _DEFAULTS[args.command])
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        log.debug("data error", exc_info=True)
        print(f"adk {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
