import logging
from pathlib import Path

from mtln.train.checkpoint import save_checkpoint

BEST_CHECKPOINT = "best.mtln"


def model_summary(params):
    width = max(len(name) for name in params)
    lines = [f"{name:<{width}}  {list(t.shape)}" for name, t in params.items()]
    lines.append(f"Total parameters: {params.num_parameters()}")
    return "\n".join(lines)


class Logger:
    def __init__(self, log_every_n_epoch, checkpoint_dir=None):
        self.log_every_n_epoch = log_every_n_epoch
        self.checkpoint_dir = None if checkpoint_dir is None else Path(checkpoint_dir)

    def log_model_summary(self, params):
        logging.info(model_summary(params))

    def log_epoch(self, epoch, train_metrics, val_metrics):
        if epoch % self.log_every_n_epoch != 0:
            return
        val_loss = val_metrics.get("total_loss")
        val_dice = val_metrics.get("dice")
        val = "n/a" if val_loss is None else f"{val_loss:.4f}, val_dsc: {val_dice:.4f}"
        logging.info(f"Epoch {epoch}: train_loss: {train_metrics['total_loss']:.4f}, val: {val}")

    def log_model(self, checkpoint):
        if self.checkpoint_dir is not None:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(self.checkpoint_dir / BEST_CHECKPOINT, checkpoint)
            logging.info(f"Saved best checkpoint from epoch {checkpoint.epoch}")

    def log_params(self, params):
        pass

    def log_config(self, config_dict):
        pass

    def log_checkpoint(self, epoch, checkpoint):
        if self.checkpoint_dir is not None:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(self.checkpoint_dir / f"checkpoint_{epoch}.mtln", checkpoint)
