"""Training report structures shared by the audio and text trainers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float


@dataclass
class TrainReport:
    """Per-epoch metrics plus snapshots of what produced them."""

    epochs: list[EpochMetrics] = field(default_factory=list)
    wall_seconds: float = 0.0
    best_epoch: int = 0
    model_path: str | None = None
    model_config: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)

    @property
    def final_train_loss(self) -> float:
        return self.epochs[-1].train_loss

    @property
    def best_val_accuracy(self) -> float:
        return max(e.val_accuracy for e in self.epochs)
