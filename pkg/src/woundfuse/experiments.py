"""Experiment grid over class subsets / split schemes, and k-fold cross-validation.

Both runners take an injectable worker so the bookkeeping (cell enumeration,
skip reasons, fold averaging, report files) can be exercised without training
a real model. Real workers are provided as defaults.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .dataset import (
    CLASS_ORDER,
    DatasetManifest,
    SPLIT_SCHEMES,
    SplitManifest,
    WoundClass,
    make_folds,
    select_subset,
    split_dataset,
)
from .metrics import MetricsReport
from .model import ModelConfig
from .training import EvalResult, TrainConfig, TrainingDiverged, evaluate, train

logger = logging.getLogger(__name__)

# which wound classes each corpus can supply
DATASET_CLASSES: dict[str, tuple[str, ...]] = {
    "azh_roi": ("BG", "N", "D", "P", "S", "V"),
    "azh_whole": ("D", "P", "S", "V"),
    "medetec": ("D", "P", "V"),
}

# location codes only exist for the ROI corpus
LOCATION_DATASETS = ("azh_roi",)


class CellSkipped(Exception):
    """A grid cell that cannot run; the message is the recorded reason."""


@dataclass(frozen=True)
class GridCell:
    dataset: str
    classes: tuple[str, ...]
    scheme: str
    use_location: bool = False

    def cell_id(self) -> str:
        loc = "loc" if self.use_location else "noloc"
        return f"{self.dataset}/{'-'.join(self.classes)}/{self.scheme}/{loc}"

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "classes": list(self.classes),
            "scheme": self.scheme,
            "use_location": self.use_location,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GridCell":
        return cls(
            dataset=str(data["dataset"]),
            classes=tuple(str(c) for c in data["classes"]),
            scheme=str(data["scheme"]),
            use_location=bool(data.get("use_location", False)),
        )


def check_feasible(cell: GridCell) -> None:
    """Raise CellSkipped with a reason if the cell cannot be run."""
    if cell.dataset not in DATASET_CLASSES:
        raise CellSkipped(f"unknown dataset {cell.dataset!r}")
    if cell.scheme not in SPLIT_SCHEMES:
        raise CellSkipped(f"unknown split scheme {cell.scheme!r}")
    if len(cell.classes) < 2:
        raise CellSkipped(f"need at least two classes, got {list(cell.classes)}")
    if len(set(cell.classes)) != len(cell.classes):
        raise CellSkipped(f"duplicate classes in {list(cell.classes)}")
    available = DATASET_CLASSES[cell.dataset]
    missing = [c for c in cell.classes if c not in available]
    if missing:
        raise CellSkipped(f"dataset {cell.dataset} has no {'/'.join(missing)} class")
    if cell.use_location and cell.dataset not in LOCATION_DATASETS:
        raise CellSkipped(f"dataset {cell.dataset} carries no location codes")


def two_class_cells(
    dataset: str = "azh_roi",
    scheme: str = "70-15-15",
    use_location: bool = False,
    pool: Sequence[str] = ("N", "D", "P", "S", "V"),
) -> list[GridCell]:
    """All pairwise class combinations from the pool, in canonical order."""
    order = [c.value for c in CLASS_ORDER if c.value in set(pool)]
    return [
        GridCell(dataset=dataset, classes=pair, scheme=scheme, use_location=use_location)
        for pair in itertools.combinations(order, 2)
    ]


def make_cells(
    datasets: Iterable[str],
    class_subsets: Iterable[Sequence[str]],
    schemes: Iterable[str],
    locations: Iterable[bool] = (False,),
) -> list[GridCell]:
    return [
        GridCell(dataset=d, classes=tuple(subset), scheme=s, use_location=loc)
        for d in datasets
        for subset in class_subsets
        for s in schemes
        for loc in locations
    ]


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


@dataclass
class GridResult:
    rows: list[dict] = field(default_factory=list)

    def completed(self) -> list[dict]:
        return [r for r in self.rows if r["status"] == "ok"]

    def skipped(self) -> list[dict]:
        return [r for r in self.rows if r["status"] == "skipped"]

    def to_dict(self) -> dict:
        return {"rows": self.rows}

    def save(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write grid.json (full reports) and grid.csv (summary table)."""
        out_dir = Path(out_dir)
        json_path = out_dir / "grid.json"
        _write_atomic(json_path, json.dumps(self.to_dict(), indent=2))
        csv_path = out_dir / "grid.csv"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = csv_path.with_suffix(".csv.tmp")
        with open(tmp, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["classes", "scheme", "dataset", "location", "status",
                 "accuracy", "precision", "recall", "f1", "reason"]
            )
            for row in self.rows:
                cell = row["cell"]
                report = row.get("report")
                scores = ["", "", "", ""]
                if report is not None:
                    scores = [
                        f"{100 * report[k]:.2f}"
                        for k in ("accuracy", "precision", "recall", "f1")
                    ]
                writer.writerow(
                    [
                        ", ".join(cell["classes"]),
                        cell["scheme"],
                        cell["dataset"],
                        "yes" if cell["use_location"] else "no",
                        row["status"],
                        *scores,
                        row.get("reason") or "",
                    ]
                )
        tmp.replace(csv_path)
        return json_path, csv_path


def run_experiment_grid(
    cells: Sequence[GridCell],
    runner: Callable[[GridCell], "MetricsReport | EvalResult"],
    out_dir: str | Path | None = None,
) -> GridResult:
    """Run each feasible cell through ``runner``; infeasible cells are recorded, not fatal.

    ``runner`` may return a MetricsReport or a full EvalResult (whose confusion
    matrix and ROC points are then included in the JSON report), or raise
    CellSkipped itself. An empty grid yields an empty result.
    """
    result = GridResult()
    for cell in cells:
        row: dict = {"cell": cell.to_dict(), "cell_id": cell.cell_id()}
        try:
            check_feasible(cell)
            outcome = runner(cell)
        except CellSkipped as skip:
            row.update(status="skipped", report=None, reason=str(skip))
            logger.info("cell %s skipped: %s", cell.cell_id(), skip)
        else:
            if isinstance(outcome, EvalResult):
                row.update(
                    status="ok",
                    report=outcome.report.to_dict(),
                    confusion=outcome.confusion.to_dict(),
                    roc=outcome.roc,
                    reason=None,
                )
            else:
                row.update(status="ok", report=outcome.to_dict(), reason=None)
            logger.info("cell %s done", cell.cell_id())
        result.rows.append(row)
        if out_dir is not None:
            result.save(out_dir)
    if out_dir is not None:
        result.save(out_dir)
    return result


def subset_for_cell(manifest: DatasetManifest, cell: GridCell) -> DatasetManifest:
    """Restrict a manifest to the cell's classes, skipping cells the data cannot fill."""
    wanted = [WoundClass.from_tag(tag) for tag in cell.classes]
    present = set(manifest.classes())
    missing = [w.value for w in wanted if w not in present]
    if missing:
        raise CellSkipped(f"manifest has no samples for {'/'.join(missing)}")
    subset, _ = select_subset(manifest, wanted)
    return subset


def train_eval_runner(
    manifests: Mapping[str, DatasetManifest],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    registry=None,
    out_dir: str | Path | None = None,
) -> Callable[[GridCell], EvalResult]:
    """Default grid worker: subset → split → train → evaluate on the test split."""

    def runner(cell: GridCell) -> EvalResult:
        if cell.dataset not in manifests:
            raise CellSkipped(f"no manifest provided for dataset {cell.dataset!r}")
        subset = subset_for_cell(manifests[cell.dataset], cell)
        split = split_dataset(subset, cell.scheme, seed=train_cfg.seed)
        cfg_dict = model_cfg.to_dict()
        cfg_dict["num_classes"] = len(cell.classes)
        cfg_dict["use_location"] = cell.use_location
        if not cell.use_location:
            cfg_dict["location_branch"] = None
        cell_cfg = ModelConfig.from_dict(cfg_dict)
        cell_dir = None if out_dir is None else Path(out_dir) / cell.cell_id().replace("/", "_")
        trained = train(cell_cfg, split, train_cfg, registry=registry, out_dir=cell_dir)
        return evaluate(
            trained.model,
            list(split.test),
            registry=registry,
            batch_size=train_cfg.batch_size,
            split_scheme=cell.scheme,
            seed=train_cfg.seed,
        )

    return runner


@dataclass
class CVResult:
    """Fold accuracies are percentages (0..100); ``mean`` averages completed folds."""

    k: int
    seed: int
    fold_accuracies: list[float | None] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    failed: bool = False

    @property
    def mean(self) -> float | None:
        done = [a for a in self.fold_accuracies if a is not None]
        return sum(done) / len(done) if done else None

    @property
    def rounded_mean(self) -> float | None:
        return None if self.mean is None else round(self.mean, 2)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "fold_accuracies": self.fold_accuracies,
            "mean": self.mean,
            "rounded_mean": self.rounded_mean,
            "failed": self.failed,
            "failures": self.failures,
        }

    def save(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write cv.json plus a one-row cv.csv (fold columns then the average)."""
        out_dir = Path(out_dir)
        json_path = out_dir / "cv.json"
        _write_atomic(json_path, json.dumps(self.to_dict(), indent=2))
        csv_path = out_dir / "cv.csv"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = csv_path.with_suffix(".csv.tmp")
        with open(tmp, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow([f"fold_{i + 1}" for i in range(self.k)] + ["avg"])
            row = [
                "" if a is None else f"{a:.2f}"
                for a in (self.fold_accuracies + [None] * (self.k - len(self.fold_accuracies)))
            ]
            writer.writerow(row + ["" if self.rounded_mean is None else f"{self.rounded_mean:.2f}"])
        tmp.replace(csv_path)
        return json_path, csv_path


def default_fold_trainer(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    registry=None,
    out_dir: str | Path | None = None,
) -> Callable[[int, SplitManifest], float]:
    """Train on k−1 folds, score the held-out fold, return accuracy in percent."""

    def fold_trainer(fold_index: int, split: SplitManifest) -> float:
        fold_dir = None if out_dir is None else Path(out_dir) / f"fold_{fold_index}"
        trained = train(model_cfg, split, train_cfg, registry=registry, out_dir=fold_dir)
        scored = evaluate(
            trained.model,
            list(split.test),
            registry=registry,
            batch_size=train_cfg.batch_size,
            split_scheme=split.scheme,
            seed=train_cfg.seed,
        )
        return 100.0 * scored.report.accuracy

    return fold_trainer


def run_cross_validation(
    manifest: DatasetManifest,
    fold_trainer: Callable[[int, SplitManifest], float],
    k: int = 5,
    seed: int = 17,
    out_dir: str | Path | None = None,
) -> CVResult:
    """k-fold cross-validation: each fold held out once, others train.

    ``fold_trainer(fold_index, split)`` returns the fold's test accuracy in
    percent. A fold that aborts (TrainingDiverged) marks the run failed but
    the remaining folds still run; partial results are persisted after every
    fold when ``out_dir`` is given.
    """
    folds = make_folds(manifest, k, seed=seed)
    result = CVResult(k=k, seed=seed)
    for i in range(k):
        train_records, test_records = folds.train_test(i)
        split = SplitManifest(
            train=tuple(train_records),
            validation=(),
            test=tuple(test_records),
            scheme=f"cv-{k}fold",
            seed=seed,
        )
        try:
            accuracy = float(fold_trainer(i, split))
        except TrainingDiverged as diverged:
            result.fold_accuracies.append(None)
            result.failures.append({"fold": i, "reason": str(diverged)})
            result.failed = True
            logger.warning("fold %d aborted: %s", i, diverged)
        else:
            result.fold_accuracies.append(accuracy)
            logger.info("fold %d accuracy %.2f%%", i, accuracy)
        if out_dir is not None:
            result.save(out_dir)
    return result
