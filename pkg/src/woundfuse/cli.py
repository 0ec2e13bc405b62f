"""Command-line entry point wiring manifests, splits, training, grids, CV, serving.

Precedence for every setting: explicit CLI flag > config-file key > built-in
default. Failures print one line naming the error class and exit 1; unknown
subcommands get usage text and exit 2. Outputs land under ``--out`` in a fixed
layout: ``splits/``, ``checkpoints/``, ``reports/``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .augment import AugmentError, AugmentPolicy, ImageDecodeError
from .bodymap import BodyMapError, default_registry, load_registry
from .dataset import (
    DatasetError,
    DatasetManifest,
    SPLIT_SCHEMES,
    Source,
    SplitManifest,
    WoundClass,
    build_manifest,
    build_manifest_from_folders,
    select_subset,
    split_dataset,
)
from .experiments import (
    GridCell,
    default_fold_trainer,
    make_cells,
    run_cross_validation,
    run_experiment_grid,
    train_eval_runner,
)
from .metrics import MetricsError
from .model import (
    BackboneSpec,
    BackboneWeightsError,
    CheckpointError,
    ModelConfig,
    ModelConfigError,
    ModelContractError,
)
from .training import TrainConfig, TrainingDiverged, TrainingError, evaluate, train

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1

KNOWN_TOP_KEYS = {
    "schema_version", "registry", "out", "seed", "scheme", "classes",
    "data", "model", "train", "grid", "cv", "serve",
}

class ConfigError(Exception):
    """Invalid configuration; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


RECOVERABLE = (
    ConfigError,
    DatasetError,
    BodyMapError,
    AugmentError,
    ImageDecodeError,
    MetricsError,
    ModelConfigError,
    ModelContractError,
    BackboneWeightsError,
    CheckpointError,
    TrainingError,
    TrainingDiverged,
)


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}; this build reads {CONFIG_SCHEMA_VERSION}")
    unknown = sorted(set(data) - KNOWN_TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return data


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a JSON object")
    return dict(value)


def _pick(flag, config: dict, key: str, default):
    """CLI flag beats config key beats default."""
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _resolve_seed(args, config: dict) -> int:
    seed = _pick(getattr(args, "seed", None), config, "seed", 17)
    try:
        return int(seed)
    except (TypeError, ValueError):
        raise ConfigError("seed", f"expected an integer, got {seed!r}") from None


def _resolve_out(args, config: dict) -> Path:
    return Path(_pick(getattr(args, "out", None), config, "out", "runs"))


def _load_registry_from(args, config: dict):
    path = _pick(getattr(args, "registry", None), config, "registry", None)
    if path is None:
        return default_registry()
    path = Path(path)
    if not path.is_file():
        raise ConfigError("registry", f"file not found: {path}")
    return load_registry(path)


def build_train_config(config: dict, args) -> TrainConfig:
    section = _section(config, "train")
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "learning_rate")):
        value = getattr(args, flag, None)
        if value is not None:
            section[key] = value
    section["seed"] = _resolve_seed(args, config)
    try:
        return TrainConfig.from_dict(section)
    except (TrainingError, AugmentError, ValueError, TypeError) as exc:
        raise ConfigError("train", str(exc)) from None


def build_model_config(config: dict, num_classes: int, use_location: bool) -> ModelConfig:
    section = _section(config, "model")
    section.setdefault("num_classes", num_classes)
    section.setdefault("use_location", use_location)
    if "backbones" not in section:
        pretrained = bool(section.pop("pretrained", True))
        section["backbones"] = [BackboneSpec(family=f, pretrained=pretrained).to_dict()
                                for f in ("resnet152", "vgg16", "efficientnet_b2")]
    else:
        section.pop("pretrained", None)
    if section.get("use_location") and section.get("location_branch") is None:
        section["location_branch"] = {
            "input_dim": 484,
            "hidden_dims": [256, 128],
            "output_dim": 64,
            "attention_embed_dim": 1,
            "attention_heads": 1,
        }
    try:
        return ModelConfig.from_dict(section)
    except (ModelConfigError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError("model", str(exc)) from None


def _parse_classes(text: str | None, config: dict) -> list[WoundClass] | None:
    raw = _pick(text, config, "classes", None)
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = [part.strip() for part in raw.split(",") if part.strip()]
    try:
        return [WoundClass.from_tag(tag) for tag in raw]
    except (DatasetError, ValueError) as exc:
        raise ConfigError("classes", str(exc)) from None


def _manifest_from(args, config: dict) -> DatasetManifest:
    data = _section(config, "data")
    path = _pick(getattr(args, "manifest", None), data, "manifest", None)
    if path is None:
        raise ConfigError("data.manifest", "no manifest given (flag --manifest or config data.manifest)")
    path = Path(path)
    if not path.is_file():
        raise ConfigError("data.manifest", f"file not found: {path}")
    return DatasetManifest.load(path)


def _subset(manifest: DatasetManifest, classes: list[WoundClass] | None) -> DatasetManifest:
    if classes is None:
        return manifest
    restricted, _ = select_subset(manifest, classes)
    return restricted


def _split_from(args, config: dict, registry) -> SplitManifest:
    split_path = getattr(args, "split", None)
    if split_path is not None:
        split_path = Path(split_path)
        if not split_path.is_file():
            raise ConfigError("split", f"file not found: {split_path}")
        return SplitManifest.load(split_path)
    manifest = _subset(_manifest_from(args, config), _parse_classes(getattr(args, "classes", None), config))
    scheme = _pick(getattr(args, "scheme", None), config, "scheme", "70-15-15")
    if scheme not in SPLIT_SCHEMES:
        raise ConfigError("scheme", f"unknown scheme {scheme!r}; known: {sorted(SPLIT_SCHEMES)}")
    return split_dataset(manifest, scheme, seed=_resolve_seed(args, config))


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    data = _section(config, "data")
    images = _pick(args.images, data, "image_root", None)
    if images is None:
        raise ConfigError("data.image_root", "no image directory given")
    images = Path(images)
    if not images.is_dir():
        raise ConfigError("data.image_root", f"directory not found: {images}")
    source_tag = _pick(args.source, data, "source", "azh_roi")
    try:
        source = Source(str(source_tag).upper())
    except ValueError:
        raise ConfigError("data.source", f"unknown source {source_tag!r}") from None
    labels = _pick(args.labels, data, "labels", None)
    locations = _pick(args.locations, data, "locations", None)
    registry = _load_registry_from(args, config) if source is Source.AZH_ROI else None

    if args.dry_run:
        print(f"dry run ok: would ingest {source.value} images from {images}")
        return 0

    if labels is not None:
        labels = Path(labels)
        if not labels.is_file():
            raise ConfigError("data.labels", f"file not found: {labels}")
        manifest = build_manifest(images, labels, registry=registry, source=source)
    else:
        manifest = build_manifest_from_folders(
            images, registry=registry, source=source, locations_file=locations
        )
    out = _resolve_out(args, config)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "manifest.json"
    manifest.save(target)
    counts = {c.value: n for c, n in manifest.class_counts().items()}
    print(f"manifest: {len(manifest)} records -> {target}")
    print("classes: " + " ".join(f"{tag}={n}" for tag, n in counts.items()))
    return 0


def cmd_split(args) -> int:
    config = load_config(args.config)
    if args.dry_run:
        _manifest_from(args, config)
        print("dry run ok: manifest loads and scheme is known")
        return 0
    split = _split_from(args, config, registry=None)
    out = _resolve_out(args, config)
    target = out / "splits" / "split.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    split.save(target)
    counts = split.split_counts()
    print(f"split {split.scheme} seed {split.seed} -> {target}")
    print(f"train={counts['train']} validation={counts['validation']} test={counts['test']}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    registry = _load_registry_from(args, config)
    split = _split_from(args, config, registry)
    train_cfg = build_train_config(config, args)
    from .training import class_tags_for

    tags = class_tags_for(split.train)
    use_location = bool(_section(config, "model").get("use_location", False))
    model_cfg = build_model_config(config, num_classes=len(tags), use_location=use_location)
    if args.dry_run:
        print(
            f"dry run ok: {model_cfg.num_classes} classes {list(tags)}, "
            f"{train_cfg.epochs} epochs, batch {train_cfg.batch_size}, seed {train_cfg.seed}"
        )
        return 0
    out = _resolve_out(args, config)
    result = train(model_cfg, split, train_cfg, registry=registry)
    from .model import save_checkpoint

    ckpt = save_checkpoint(result.model, out / "checkpoints" / "model.pt", model_id="model")
    history = result.history.save_jsonl(out / "reports" / "history.jsonl")
    best = "" if result.best_val_accuracy is None else f" | best val acc {100 * result.best_val_accuracy:.2f} (epoch {result.best_epoch})"
    print(f"trained {len(result.history)} epochs{best}")
    print(f"checkpoint -> {ckpt}")
    print(f"history -> {history}")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    if args.checkpoint is None:
        raise ConfigError("checkpoint", "no checkpoint given")
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigError("checkpoint", f"file not found: {ckpt}")
    registry = _load_registry_from(args, config)
    if args.dry_run:
        from .model import load_checkpoint

        model, _ = load_checkpoint(ckpt)
        print(f"dry run ok: checkpoint loads ({len(model.class_tags)} classes)")
        return 0
    if args.split is not None:
        split = _split_from(args, config, registry)
        records = list(getattr(split, args.split_name))
        scheme = split.scheme
    else:
        manifest = _subset(_manifest_from(args, config), _parse_classes(args.classes, config))
        records = list(manifest.records)
        scheme = None
    result = evaluate(ckpt, records, registry=registry, split_scheme=scheme)
    out = _resolve_out(args, config)
    target = out / "reports" / "eval.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(result.to_dict(), indent=2))
    tmp.replace(target)
    print(f"accuracy {100 * result.report.accuracy:.2f}")
    print(f"report -> {target}")
    return 0


def _grid_cells(args, config: dict) -> list[GridCell]:
    grid = _section(config, "grid")
    if args.classes is not None:
        classes = tuple(part.strip() for part in args.classes.split(",") if part.strip())
        return [
            GridCell(
                dataset=args.dataset or "azh_roi",
                classes=classes,
                scheme=args.scheme or _pick(None, config, "scheme", "70-15-15"),
                use_location=bool(args.location),
            )
        ]
    if "cells" in grid:
        try:
            return [GridCell.from_dict(cell) for cell in grid["cells"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("grid.cells", str(exc)) from None
    if "class_subsets" in grid:
        return make_cells(
            datasets=grid.get("datasets_list", ["azh_roi"]),
            class_subsets=grid["class_subsets"],
            schemes=grid.get("schemes", ["70-15-15"]),
            locations=grid.get("locations", [False]),
        )
    return []


def cmd_grid(args) -> int:
    config = load_config(args.config)
    cells = _grid_cells(args, config)
    if args.dry_run:
        for cell in cells:
            print(cell.cell_id())
        print(f"dry run ok: {len(cells)} cells")
        return 0
    grid = _section(config, "grid")
    manifest_paths = grid.get("datasets", {})
    if args.manifest is not None:
        dataset = args.dataset or "azh_roi"
        manifest_paths = dict(manifest_paths)
        manifest_paths[dataset] = args.manifest
    manifests = {}
    for name, path in manifest_paths.items():
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"grid.datasets.{name}", f"file not found: {path}")
        manifests[name] = DatasetManifest.load(path)
    train_cfg = build_train_config(config, args)
    needs_location = any(cell.use_location for cell in cells)
    width = max((len(cell.classes) for cell in cells), default=2)
    model_cfg = build_model_config(config, num_classes=width, use_location=needs_location)
    registry = _load_registry_from(args, config)
    out = _resolve_out(args, config)
    runner = train_eval_runner(manifests, model_cfg, train_cfg, registry=registry)
    result = run_experiment_grid(cells, runner, out_dir=out / "reports")
    print(f"grid: {len(result.completed())} completed, {len(result.skipped())} skipped")
    print(f"reports -> {out / 'reports' / 'grid.csv'}")
    return 0


def cmd_cv(args) -> int:
    config = load_config(args.config)
    registry = _load_registry_from(args, config)
    manifest = _subset(_manifest_from(args, config), _parse_classes(args.classes, config))
    seed = _resolve_seed(args, config)
    cv_section = _section(config, "cv")
    k = args.k if args.k is not None else int(cv_section.get("k", 5))
    train_cfg = build_train_config(config, args)
    from .training import class_tags_for

    tags = class_tags_for(manifest.records)
    use_location = bool(_section(config, "model").get("use_location", False))
    model_cfg = build_model_config(config, num_classes=len(tags), use_location=use_location)
    if args.dry_run:
        print(f"dry run ok: {k}-fold over {len(manifest)} records, classes {list(tags)}")
        return 0
    out = _resolve_out(args, config)
    trainer = default_fold_trainer(model_cfg, train_cfg, registry=registry)
    result = run_cross_validation(
        manifest, trainer, k=k, seed=seed, out_dir=out / "reports"
    )
    folds = " ".join("-" if a is None else f"{a:.2f}" for a in result.fold_accuracies)
    print(f"cv folds: {folds}")
    print(f"avg {result.rounded_mean}" + (" (failed)" if result.failed else ""))
    print(f"reports -> {out / 'reports' / 'cv.csv'}")
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    serve_section = _section(config, "serve")
    checkpoint = _pick(args.checkpoint, serve_section, "checkpoint", None)
    registry_path = _pick(args.registry, config, "registry", None)
    host = _pick(args.host, serve_section, "host", "127.0.0.1")
    port = int(_pick(args.port, serve_section, "port", 8000))
    from .service import ENV_CHECKPOINT, create_app, serve

    if checkpoint is None and not os.environ.get(ENV_CHECKPOINT):
        raise ConfigError(
            "serve.checkpoint",
            f"no checkpoint given (flag --checkpoint, config serve.checkpoint, or {ENV_CHECKPOINT})",
        )
    if args.dry_run:
        app = create_app(checkpoint, registry_path=registry_path)
        print(f"dry run ok: would serve {app.state.model_id} on {host}:{port}")
        return 0
    serve(checkpoint, registry_path=registry_path, host=host, port=port)
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise ConfigError("run", f"directory not found: {run_dir}")
    reports = run_dir / "reports"
    lines: list[str] = []
    eval_path = reports / "eval.json"
    if eval_path.is_file():
        data = json.loads(eval_path.read_text())
        rep = data["report"]
        lines.append(
            "eval: accuracy {:.2f} precision {:.2f} recall {:.2f} f1 {:.2f}".format(
                *(100 * rep[k] for k in ("accuracy", "precision", "recall", "f1"))
            )
        )
    grid_path = reports / "grid.csv"
    if grid_path.is_file():
        lines.append("grid:")
        lines.extend("  " + row for row in grid_path.read_text().strip().splitlines())
    cv_path = reports / "cv.json"
    if cv_path.is_file():
        data = json.loads(cv_path.read_text())
        folds = " ".join("-" if a is None else f"{a:.2f}" for a in data["fold_accuracies"])
        lines.append(f"cv: folds {folds} avg {data['rounded_mean']}")
    history_path = reports / "history.jsonl"
    if history_path.is_file():
        from .training import RunHistory

        history = RunHistory.load_jsonl(history_path)
        if len(history):
            last = history.epochs[-1]
            val = "" if last.val_accuracy is None else f" val acc {100 * last.val_accuracy:.2f}"
            lines.append(f"training: {len(history)} epochs, final train acc {100 * last.train_accuracy:.2f}{val}")
    if not lines:
        print(f"no reports found under {reports}")
        return 0
    text = "\n".join(lines)
    print(text)
    if args.out is not None:
        target = Path(args.out) / "reports" / "summary.txt"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text + "\n")
        print(f"summary -> {target}")
    return 0


# ------------------------------------------------------------------- parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override its keys)")
    parser.add_argument("--out", help="output directory (default: runs)")
    parser.add_argument("--seed", type=int, help="seed threaded through all randomness")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs, run nothing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="woundfuse",
        description="Wound image classification: data prep, training, evaluation, serving.",
    )
    sub = parser.add_subparsers(dest="command", metavar="{ingest,split,train,eval,grid,cv,serve,report}")

    p = sub.add_parser("ingest", help="build a dataset manifest from images + labels")
    p.add_argument("--images", help="image root directory")
    p.add_argument("--labels", help="labels CSV (sample_id,relative_path,class[,location_code])")
    p.add_argument("--locations", help="sidecar CSV of relative_path,location_code for folder layouts")
    p.add_argument("--source", choices=[s.value.lower() for s in Source], help="corpus kind")
    p.add_argument("--registry", help="body-map registry CSV (default: packaged 484 regions)")
    _add_common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("split", help="split a manifest into train/validation/test")
    p.add_argument("--manifest", help="manifest JSON from ingest")
    p.add_argument("--scheme", choices=sorted(SPLIT_SCHEMES), help="split scheme")
    p.add_argument("--classes", help="comma-separated class subset (e.g. N,V)")
    _add_common(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train", help="train a model on a split")
    p.add_argument("--manifest", help="manifest JSON (will be split per --scheme)")
    p.add_argument("--split", help="existing split JSON (overrides --manifest)")
    p.add_argument("--scheme", choices=sorted(SPLIT_SCHEMES))
    p.add_argument("--classes", help="comma-separated class subset")
    p.add_argument("--registry", help="body-map registry CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a split or manifest")
    p.add_argument("--checkpoint", help="checkpoint file")
    p.add_argument("--manifest", help="manifest JSON")
    p.add_argument("--split", help="split JSON")
    p.add_argument("--split-name", dest="split_name", default="test",
                   choices=["train", "validation", "test"])
    p.add_argument("--classes", help="comma-separated class subset")
    p.add_argument("--registry", help="body-map registry CSV")
    _add_common(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("grid", help="run an experiment grid of class subsets and schemes")
    p.add_argument("--classes", help="comma-separated classes for a one-cell grid")
    p.add_argument("--dataset", help="dataset name for the one-cell grid (default azh_roi)")
    p.add_argument("--scheme", choices=sorted(SPLIT_SCHEMES))
    p.add_argument("--location", action="store_true", help="use the location branch")
    p.add_argument("--manifest", help="manifest for the one-cell grid's dataset")
    p.add_argument("--registry", help="body-map registry CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    _add_common(p)
    p.set_defaults(handler=cmd_grid)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--manifest", help="manifest JSON")
    p.add_argument("--k", type=int, help="number of folds (default 5)")
    p.add_argument("--classes", help="comma-separated class subset")
    p.add_argument("--registry", help="body-map registry CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    _add_common(p)
    p.set_defaults(handler=cmd_cv)

    p = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p.add_argument("--checkpoint", help="checkpoint file (WOUNDFUSE_CHECKPOINT overrides)")
    p.add_argument("--registry", help="body-map registry CSV")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    _add_common(p)
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("report", help="summarize the reports in a run directory")
    p.add_argument("--run", required=True, help="run directory (containing reports/)")
    p.add_argument("--out", help="also write reports/summary.txt under this directory")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.handler(args)
    except RECOVERABLE as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
