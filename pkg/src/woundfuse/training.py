"""Training loop, loss, evaluation, and run-history bookkeeping.

Determinism contract: a run is fully determined by (config, data, seed).
The torch RNG is seeded before model construction, all shuffling and
augmentation draw from one numpy Generator, and batches are assembled
synchronously, so two runs with the same inputs produce identical weights.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from itertools import zip_longest
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from torch.optim import Adam
from torch.optim.lr_scheduler import ReduceLROnPlateau

from .augment import AugmentPolicy, augment_sample, load_image, preprocess
from .bodymap import BodyMapRegistry, default_registry, encode_location
from .dataset import SampleRecord, SplitManifest
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, roc_points
from .model import FusionModel, ModelConfig, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


class TrainingError(ValueError):
    """Raised for invalid training configurations or data contracts."""


class TrainingDiverged(RuntimeError):
    """Raised when a loss turns non-finite; carries where and what."""

    def __init__(self, message: str, epoch: int, batch: int, loss_value: float, learning_rate: float):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.loss_value = loss_value
        self.learning_rate = learning_rate


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-4
    min_learning_rate: float = 1e-5
    plateau_factor: float = 0.1
    plateau_patience: int = 10
    seed: int = 17
    augment: AugmentPolicy | None = field(default_factory=AugmentPolicy)
    # keep normalization layers in inference mode while training; per-batch
    # statistics at batch sizes this small mostly encode batch composition,
    # which can stall short random-init runs
    freeze_norm_stats: bool = False
    # round-robin classes when forming batches instead of plain shuffling;
    # keeps tiny batches from whipsawing the classifier on skewed draws
    balanced_batches: bool = False

    def validate(self) -> None:
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise TrainingError(f"batch_size must be >= 2, got {self.batch_size}")
        if not self.min_learning_rate > 0:
            raise TrainingError(f"min_learning_rate must be > 0, got {self.min_learning_rate}")
        if self.learning_rate < self.min_learning_rate:
            raise TrainingError(
                f"learning_rate {self.learning_rate} below its floor {self.min_learning_rate}"
            )
        if not 0.0 < self.plateau_factor < 1.0:
            raise TrainingError(f"plateau_factor must be in (0, 1), got {self.plateau_factor}")
        if self.plateau_patience < 0:
            raise TrainingError(f"plateau_patience must be >= 0, got {self.plateau_patience}")
        if self.augment is not None:
            self.augment.validate()

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "min_learning_rate": self.min_learning_rate,
            "plateau_factor": self.plateau_factor,
            "plateau_patience": self.plateau_patience,
            "seed": self.seed,
            "augment": None if self.augment is None else self.augment.to_dict(),
            "freeze_norm_stats": self.freeze_norm_stats,
            "balanced_batches": self.balanced_batches,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        cfg = cls(
            epochs=int(data.get("epochs", 100)),
            batch_size=int(data.get("batch_size", 32)),
            learning_rate=float(data.get("learning_rate", 1e-4)),
            min_learning_rate=float(data.get("min_learning_rate", 1e-5)),
            plateau_factor=float(data.get("plateau_factor", 0.1)),
            plateau_patience=int(data.get("plateau_patience", 10)),
            seed=int(data.get("seed", 17)),
            freeze_norm_stats=bool(data.get("freeze_norm_stats", False)),
            balanced_batches=bool(data.get("balanced_batches", False)),
            augment=(
                None
                if data.get("augment", "default") is None
                else AugmentPolicy.from_dict(data["augment"])
                if "augment" in data
                else AugmentPolicy()
            ),
        )
        cfg.validate()
        return cfg


def cross_entropy_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-probability of the true class under softmax(logits)."""
    if logits.ndim != 2:
        raise TrainingError(f"logits must be (batch, classes), got {tuple(logits.shape)}")
    if logits.shape[0] == 0:
        raise TrainingError("empty batch")
    if labels.shape != logits.shape[:1]:
        raise TrainingError(
            f"labels shape {tuple(labels.shape)} does not match batch of {logits.shape[0]}"
        )
    num_classes = logits.shape[1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= num_classes):
        raise TrainingError(f"label outside [0, {num_classes})")
    return F.cross_entropy(logits, labels)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float | None
    val_accuracy: float | None
    learning_rate: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EpochStats":
        return cls(
            epoch=int(data["epoch"]),
            train_loss=float(data["train_loss"]),
            train_accuracy=float(data["train_accuracy"]),
            val_loss=None if data.get("val_loss") is None else float(data["val_loss"]),
            val_accuracy=None if data.get("val_accuracy") is None else float(data["val_accuracy"]),
            learning_rate=float(data["learning_rate"]),
        )


@dataclass
class RunHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def append(self, stats: EpochStats) -> None:
        self.epochs.append(stats)

    def __len__(self) -> int:
        return len(self.epochs)

    def learning_rates(self) -> list[float]:
        return [e.learning_rate for e in self.epochs]

    def save_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w") as handle:
            for stats in self.epochs:
                handle.write(json.dumps(stats.to_dict()) + "\n")
        tmp.replace(path)
        return path

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "RunHistory":
        history = cls()
        with open(path) as handle:
            for line in handle:
                line = line.strip()
                if line:
                    history.append(EpochStats.from_dict(json.loads(line)))
        return history


def predict_indices(logits: torch.Tensor) -> np.ndarray:
    """Argmax over class scores; ties resolve to the lowest class index."""
    return np.argmax(logits.detach().cpu().numpy(), axis=1)


def class_tags_for(records: Sequence[SampleRecord]) -> tuple[str, ...]:
    """Class tags present in the records, in canonical order."""
    from .dataset import CLASS_ORDER

    present = {rec.label for rec in records}
    return tuple(c.value for c in CLASS_ORDER if c in present)


def _label_indices(records: Sequence[SampleRecord], class_tags: Sequence[str]) -> np.ndarray:
    index_of = {tag: i for i, tag in enumerate(class_tags)}
    missing = sorted({rec.label.value for rec in records} - set(index_of))
    if missing:
        raise TrainingError(
            f"records carry classes {missing} absent from the model's class list {list(class_tags)}"
        )
    return np.array([index_of[rec.label.value] for rec in records], dtype=np.int64)


def _require_locations(records: Sequence[SampleRecord]) -> None:
    missing = [rec.sample_id for rec in records if rec.location_code is None]
    if missing:
        raise TrainingError(
            f"model uses locations but {len(missing)} records lack a code (e.g. sample {missing[0]})"
        )


def _make_batch(
    records: Sequence[SampleRecord],
    model: FusionModel,
    registry: BodyMapRegistry | None,
    augment: AugmentPolicy | None,
    rng: np.random.Generator | None,
) -> tuple[torch.Tensor, torch.Tensor | None]:
    mean, std = model.normalization
    images = []
    for rec in records:
        image = load_image(rec.image_path)
        if augment is not None:
            image = augment_sample(image, augment, rng)
        tensor = preprocess(image, size=model.cfg.input_size, mean=mean, std=std)
        images.append(tensor.data)
    batch = torch.from_numpy(np.stack(images))
    locations = None
    if model.uses_location:
        encoded = [encode_location(rec.location_code, registry) for rec in records]
        locations = torch.from_numpy(np.stack(encoded))
    return batch, locations


def _batches(indices: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]
    # a trailing singleton breaks batch-norm statistics in train mode; fold it in
    if len(chunks) >= 2 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _balanced_order(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Round-robin the classes so consecutive batches see a near-even mix.

    Every index still appears exactly once; once a class runs out, the
    remaining (larger) classes keep cycling, so any imbalance pools at the
    end of the epoch rather than inside random batches.
    """
    buckets = [list(rng.permutation(np.flatnonzero(labels == c))) for c in np.unique(labels)]
    order = []
    for group in zip_longest(*buckets):
        order.extend(int(i) for i in group if i is not None)
    return np.asarray(order)


def _eval_pass(
    model: FusionModel,
    records: Sequence[SampleRecord],
    registry: BodyMapRegistry | None,
    batch_size: int,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, predicted indices, and softmax probabilities without augmentation."""
    labels = _label_indices(records, model.class_tags)
    was_training = model.training
    model.eval()
    losses = []
    probabilities = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            images, locations = _make_batch(chunk, model, registry, None, None)
            logits = model(images, locations) if model.uses_location else model(images)
            target = torch.from_numpy(labels[start : start + len(chunk)])
            losses.append(float(cross_entropy_loss(logits, target)) * len(chunk))
            probabilities.append(F.softmax(logits, dim=1).cpu().numpy())
    model.train(was_training)
    probs = np.concatenate(probabilities, axis=0)
    return sum(losses) / len(records), probs.argmax(axis=1), probs


@dataclass
class TrainResult:
    model: FusionModel
    history: RunHistory
    class_tags: tuple[str, ...]
    best_epoch: int
    best_val_accuracy: float | None
    checkpoint_path: Path | None = None
    history_path: Path | None = None


def train(
    model_cfg: ModelConfig,
    split: SplitManifest,
    train_cfg: TrainConfig,
    registry: BodyMapRegistry | None = None,
    out_dir: str | Path | None = None,
    model_id: str = "model",
) -> TrainResult:
    """Fit a fusion model on a split: Adam, accuracy-plateau LR decay, best-val weights.

    When the split carries a validation set, the learning rate decays on a
    validation-accuracy plateau (floored at ``min_learning_rate``) and the
    returned model holds the weights of the best validation epoch. Without one
    the final-epoch weights stand. A non-finite loss aborts the run.
    """
    train_cfg.validate()
    model_cfg.validate()
    train_records = list(split.train)
    if len(train_records) < 2:
        raise TrainingError("training requires at least two samples")
    val_records = list(split.validation)
    has_val = bool(val_records)

    class_tags = class_tags_for(train_records)
    if len(class_tags) != model_cfg.num_classes:
        raise TrainingError(
            f"model expects {model_cfg.num_classes} classes but the training split has {len(class_tags)}: {list(class_tags)}"
        )

    if model_cfg.use_location:
        if registry is None:
            registry = default_registry()
        _require_locations(train_records)
        if has_val:
            _require_locations(val_records)

    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    model = FusionModel(
        model_cfg,
        class_tags,
        registry_size=len(registry) if registry is not None else None,
    )
    labels = _label_indices(train_records, class_tags)

    optimizer = Adam(
        (p for p in model.parameters() if p.requires_grad), lr=train_cfg.learning_rate
    )
    scheduler = None
    if has_val:
        scheduler = ReduceLROnPlateau(
            optimizer,
            mode="max",
            factor=train_cfg.plateau_factor,
            patience=train_cfg.plateau_patience,
            min_lr=train_cfg.min_learning_rate,
        )

    history = RunHistory()
    best_state = None
    best_val_accuracy = -1.0
    best_epoch = 0

    def abort(epoch: int, batch: int, value: float) -> TrainingDiverged:
        lr = optimizer.param_groups[0]["lr"]
        if out_dir is not None:
            history.save_jsonl(Path(out_dir) / "history.jsonl")
        return TrainingDiverged(
            f"non-finite loss {value!r} at epoch {epoch}, batch {batch} (lr={lr:g}); run aborted",
            epoch=epoch,
            batch=batch,
            loss_value=value,
            learning_rate=lr,
        )

    for epoch in range(1, train_cfg.epochs + 1):
        lr_in_effect = optimizer.param_groups[0]["lr"]
        model.train()
        if train_cfg.freeze_norm_stats:
            for module in model.modules():
                if isinstance(module, nn.modules.batchnorm._BatchNorm):
                    module.eval()
        if train_cfg.balanced_batches:
            order = _balanced_order(labels, rng)
        else:
            order = rng.permutation(len(train_records))
        epoch_loss = 0.0
        correct = 0
        for batch_no, chunk_idx in enumerate(_batches(order, train_cfg.batch_size)):
            chunk = [train_records[i] for i in chunk_idx]
            images, locations = _make_batch(chunk, model, registry, train_cfg.augment, rng)
            target = torch.from_numpy(labels[chunk_idx])
            optimizer.zero_grad()
            logits = model(images, locations) if model.uses_location else model(images)
            loss = cross_entropy_loss(logits, target)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise abort(epoch, batch_no, value)
            loss.backward()
            optimizer.step()
            epoch_loss += value * len(chunk)
            correct += int((predict_indices(logits) == labels[chunk_idx]).sum())
        train_loss = epoch_loss / len(train_records)
        train_accuracy = correct / len(train_records)

        val_loss = val_accuracy = None
        if has_val:
            val_labels = _label_indices(val_records, class_tags)
            val_loss, val_pred, _ = _eval_pass(model, val_records, registry, train_cfg.batch_size)
            if not np.isfinite(val_loss):
                raise abort(epoch, -1, val_loss)
            val_accuracy = float((val_pred == val_labels).mean())
            if val_accuracy > best_val_accuracy:
                best_val_accuracy = val_accuracy
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
            scheduler.step(val_accuracy)

        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=train_loss,
                train_accuracy=train_accuracy,
                val_loss=val_loss,
                val_accuracy=val_accuracy,
                learning_rate=lr_in_effect,
            )
        )
        logger.info(
            "epoch %d/%d: train loss %.4f acc %.4f%s lr %g",
            epoch,
            train_cfg.epochs,
            train_loss,
            train_accuracy,
            "" if val_accuracy is None else f" | val loss {val_loss:.4f} acc {val_accuracy:.4f}",
            lr_in_effect,
        )

    if has_val and best_state is not None:
        model.load_state_dict(best_state)
    else:
        best_epoch = train_cfg.epochs
        best_val_accuracy = None
    model.eval()

    checkpoint_path = history_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        checkpoint_path = save_checkpoint(model, out_dir / f"{model_id}.pt", model_id=model_id)
        history_path = history.save_jsonl(out_dir / "history.jsonl")

    return TrainResult(
        model=model,
        history=history,
        class_tags=class_tags,
        best_epoch=best_epoch,
        best_val_accuracy=None if best_val_accuracy is None else float(best_val_accuracy),
        checkpoint_path=checkpoint_path,
        history_path=history_path,
    )


@dataclass
class EvalResult:
    report: MetricsReport
    confusion: ConfusionMatrix
    predictions: list[dict]
    roc: dict

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "confusion": self.confusion.to_dict(),
            "predictions": self.predictions,
            "roc": self.roc,
        }


def evaluate(
    model: FusionModel | str | Path,
    records: Sequence[SampleRecord],
    registry: BodyMapRegistry | None = None,
    batch_size: int = 32,
    split_scheme: str | None = None,
    seed: int | None = None,
) -> EvalResult:
    """Score a model (or checkpoint path) on records: metrics, confusion, ROC."""
    if not isinstance(model, FusionModel):
        model, _ = load_checkpoint(model)
    records = list(records)
    if not records:
        raise TrainingError("no records to evaluate")
    if model.uses_location:
        if registry is None:
            registry = default_registry()
        _require_locations(records)
    labels = _label_indices(records, model.class_tags)
    _, predicted, probabilities = _eval_pass(model, records, registry, batch_size)
    confusion = ConfusionMatrix.from_predictions(
        labels, predicted, len(model.class_tags), model.class_tags
    )
    report = compute_metrics(confusion, split_scheme=split_scheme, seed=seed)
    roc = roc_points(labels, probabilities, model.class_tags)
    predictions = [
        {
            "sample_id": rec.sample_id,
            "true_class": model.class_tags[labels[i]],
            "predicted_class": model.class_tags[predicted[i]],
            "probabilities": {
                tag: float(probabilities[i, j]) for j, tag in enumerate(model.class_tags)
            },
        }
        for i, rec in enumerate(records)
    ]
    return EvalResult(report=report, confusion=confusion, predictions=predictions, roc=roc)
