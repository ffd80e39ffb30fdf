import csv
import logging
import numpy as np
from collections import namedtuple
from itertools import batched
from scipy.special import expit

from mtln.evaluate.metrics import dice_score
from mtln.train.checkpoint import make_checkpoint
from mtln.train.checkpoint import restore_params
from mtln.train.head_dataset import HeadDataset
from mtln.train.loss import LossConfig
from mtln.train.loss import compute_losses
from mtln.train.model import NetworkConfig
from mtln.train.model import build_mtln
from mtln.train.model import forward_mtln
from mtln.train.optimizer import SGDMomentum
from mtln.train.tensor import backward
from mtln.train.tensor import current_tape
from mtln.train.tensor import no_grad

MODES = ("multi-task", "single-task")
LOSS_LOG_FIELDS = ["epoch", "train_loss", "val_loss", "val_dsc"]

EpochLog = namedtuple("EpochLog", LOSS_LOG_FIELDS)


class NonFiniteLossError(RuntimeError):
    def __init__(self, sample_id, message):
        super().__init__(f"Non-finite values while training on sample {sample_id}: {message}")
        self.sample_id = sample_id


class TrainConfig:
    def __init__(
        self,
        learning_rate=0.001,
        momentum=0.9,
        epochs=200,
        batch_size=1,
        mode="multi-task",
        log_every_n_epoch=1,
        checkpoint_every_n_epoch=10,
        seed=0,
        loss=None,
        network=None,
    ):
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.mode = mode
        self.log_every_n_epoch = int(log_every_n_epoch)
        self.checkpoint_every_n_epoch = int(checkpoint_every_n_epoch)
        self.seed = int(seed)
        self.loss = LossConfig() if loss is None else loss
        self.network = NetworkConfig(seed=self.seed) if network is None else network
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError(
                f"epochs and batch_size must be at least 1, got {epochs}, {batch_size}"
            )
        if self.log_every_n_epoch < 1 or self.checkpoint_every_n_epoch < 1:
            raise ValueError("Logging and checkpoint frequencies must be at least 1")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode}")

    @staticmethod
    def get_args(config):
        return config["train"] | {
            "seed": config["seed"],
            "loss": LossConfig.from_config(config["loss"]),
            "network": NetworkConfig.from_config(config["network"], seed=config["seed"]),
        }

    @classmethod
    def from_config(cls, config):
        return cls(**cls.get_args(config))

    def effective_loss(self):
        return self.loss.single_task() if self.mode == "single-task" else self.loss


def sample_losses(params, example, loss_config):
    seg_logits, ellipse_pred = forward_mtln(params, example["image"])
    return seg_logits, compute_losses(seg_logits, ellipse_pred, example, loss_config)


class Trainer:
    def __init__(self, config, loggers, checkpoint=None):
        self.config = config
        self.train_config = TrainConfig.from_config(config)
        self.loss_config = self.train_config.effective_loss()
        self.loggers = loggers
        self.setup_model(checkpoint)
        [l.log_params(config) for l in self.loggers]
        [l.log_config(config) for l in self.loggers]
        [l.log_model_summary(self.params) for l in self.loggers]

    def setup_model(self, checkpoint):
        self.epoch = 0
        velocity = None
        if checkpoint is None:
            self.params = build_mtln(self.train_config.network)
        else:
            self.params = restore_params(checkpoint)
            if self.params.config != self.train_config.network:
                raise ValueError("Checkpoint network does not match the run configuration")
            self.epoch = checkpoint.epoch
            velocity = checkpoint.velocity or None
        self.optimizer = SGDMomentum(
            self.train_config.learning_rate, self.train_config.momentum, velocity
        )
        self.best = None
        self.best_loss = np.inf
        self.loss_log = []

    def training_loop(self, batch):
        grads = {name: np.zeros_like(t.values) for name, t in self.params.items()}
        losses = []
        for example in batch:
            try:
                _, out = sample_losses(self.params, example, self.loss_config)
                backward(out["total_loss"])
            except FloatingPointError as e:
                current_tape().clear()
                logging.error(f"Training aborted on sample {example['id']}: {e}")
                raise NonFiniteLossError(example["id"], str(e)) from e
            losses.append(out["total_loss"].item())
            for name, t in self.params.items():
                if t.grad is None:
                    continue
                if not np.all(np.isfinite(t.grad)):
                    raise NonFiniteLossError(example["id"], f"gradient of {name} is not finite")
                grads[name] += t.grad
        grads = {name: g / len(batch) for name, g in grads.items()}
        params = self.optimizer.step(self.params, grads)
        for name, t in params.items():
            if not np.all(np.isfinite(t.values)):
                raise NonFiniteLossError(
                    batch[-1]["id"], f"update of {name} produced non-finite values"
                )
        self.params = params
        return losses

    @no_grad()
    def evaluate(self, dataset):
        if len(dataset) == 0:
            return {}
        losses, dice = [], []
        for example in dataset:
            try:
                seg_logits, out = sample_losses(self.params, example, self.loss_config)
            except FloatingPointError as e:
                raise NonFiniteLossError(example["id"], str(e)) from e
            losses.append(out["total_loss"].item())
            probs = expit(seg_logits.values[0, 0])
            dice.append(dice_score(probs >= 0.5, example["mask"]))
        return {"total_loss": float(np.mean(losses)), "dice": float(np.mean(dice))}

    def checkpoint(self):
        return make_checkpoint(self.config, self.epoch, self.params, self.optimizer.velocity or {})

    def save_checkpoint(self):
        if self.epoch % self.train_config.checkpoint_every_n_epoch == 0:
            [l.log_checkpoint(self.epoch, self.checkpoint()) for l in self.loggers]

    def fit(self, train_dataset, val_dataset):
        if len(train_dataset) == 0:
            raise ValueError("Training split is empty")
        batch_size = self.train_config.batch_size
        while self.epoch < self.train_config.epochs:
            rng = np.random.default_rng([self.train_config.seed, self.epoch])
            order = rng.permutation(len(train_dataset))
            losses = []
            for indices in batched(order, batch_size):
                losses += self.training_loop([train_dataset[i] for i in indices])
            train_metrics = {"total_loss": float(np.mean(losses))}
            val_metrics = self.evaluate(val_dataset)
            self.loss_log.append(
                EpochLog(
                    self.epoch,
                    train_metrics["total_loss"],
                    val_metrics.get("total_loss"),
                    val_metrics.get("dice"),
                )
            )
            [l.log_epoch(self.epoch, train_metrics, val_metrics) for l in self.loggers]
            selection = val_metrics.get("total_loss", train_metrics["total_loss"])
            self.epoch += 1
            if selection < self.best_loss:
                self.best_loss = selection
                self.best = self.checkpoint()
            self.save_checkpoint()
        if self.best is None:
            self.best = self.checkpoint()
        [l.log_model(self.best) for l in self.loggers]
        return self.best, self.loss_log


def select_split(manifest, samples, split):
    wanted = {r.id for r in manifest.split(split)}
    return [s for s in samples if s.id in wanted]


def train(config, manifest, samples, loggers=(), checkpoint=None, executor=None):
    trainer = Trainer(config, list(loggers), checkpoint=checkpoint)
    input_size = trainer.train_config.network.input_size
    train_data, val_data = (
        HeadDataset.from_samples(
            select_split(manifest, samples, split), input_size, trainer.loss_config, executor
        )
        for split in ("train", "val")
    )
    logging.info(f"Training on {len(train_data)} samples, validating on {len(val_data)}")
    return trainer.fit(train_data, val_data)


def write_loss_log(path, loss_log):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOSS_LOG_FIELDS)
        for row in loss_log:
            writer.writerow(["" if v is None else repr(v) for v in row])
