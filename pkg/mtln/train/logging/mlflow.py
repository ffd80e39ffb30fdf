import mlflow
import tempfile
from pathlib import Path

from mtln.train.checkpoint import save_checkpoint
from mtln.train.logging.logger import Logger
from mtln.train.logging.logger import model_summary


def flatten_config(config, prefix=""):
    flat = {}
    for key, value in config.items():
        if isinstance(value, dict):
            flat |= flatten_config(value, f"{prefix}{key}.")
        else:
            flat[f"{prefix}{key}"] = value
    return flat


class MLFlowLogger(Logger):
    def __init__(self, uri, log_every_n_epoch, run_id=None):
        super().__init__(log_every_n_epoch)
        mlflow.set_tracking_uri(uri=uri)
        mlflow.start_run(run_id=run_id)

    def __del__(self):
        mlflow.end_run()

    def log_model_summary(self, params):
        mlflow.log_text(model_summary(params), "model_summary.txt")

    def log_epoch(self, epoch, train_metrics, val_metrics):
        if epoch % self.log_every_n_epoch != 0:
            return
        metrics = {f"train_{k}": v for k, v in train_metrics.items()} | {
            f"val_{k}": v for k, v in val_metrics.items()
        }
        mlflow.log_metrics(metrics, step=epoch)

    def log_model(self, checkpoint):
        with tempfile.TemporaryDirectory() as tmp_dir:
            filepath = Path(tmp_dir) / "best.mtln"
            save_checkpoint(filepath, checkpoint)
            mlflow.log_artifact(filepath)

    def log_params(self, params):
        mlflow.log_params(flatten_config(params))

    def log_config(self, config_dict):
        mlflow.log_dict(config_dict, "config.json")

    def log_checkpoint(self, epoch, checkpoint):
        with tempfile.TemporaryDirectory() as tmp_dir:
            filepath = Path(tmp_dir) / f"checkpoint_{epoch}.mtln"
            save_checkpoint(filepath, checkpoint)
            mlflow.log_artifact(filepath, artifact_path="checkpoints")
