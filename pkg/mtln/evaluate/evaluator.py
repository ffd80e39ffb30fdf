import logging
import numpy as np
from collections import namedtuple
from functools import partial
from scipy.special import expit

from mtln.common.ellipse import circumference_mm
from mtln.common.ellipse import denormalize_ellipse
from mtln.common.ellipse import normalize_ellipse
from mtln.common.ellipse import to_vector
from mtln.common.image import resize
from mtln.evaluate.metrics import evaluate_case
from mtln.evaluate.metrics import evaluate_tuner
from mtln.evaluate.report import summarize_reports
from mtln.train.checkpoint import restore_params
from mtln.train.head_dataset import image_tensor
from mtln.train.model import forward_mtln
from mtln.train.tensor import no_grad

Prediction = namedtuple("Prediction", ["probs", "tuner_vector", "tuner_ellipse"])
Evaluation = namedtuple("Evaluation", ["reports", "summary", "tuner_reports"])


def is_multi_task(checkpoint):
    return checkpoint.config["train"]["mode"] == "multi-task"


@no_grad()
def predict(params, image):
    """Segmentation probabilities and regressed ellipse at the native resolution of `image`."""
    height, width = image.shape
    seg_logits, ellipse_pred = forward_mtln(params, image_tensor(image, params.config.input_size))
    probs = resize(expit(seg_logits.values[0, 0].astype(np.float64)), (height, width), order=1)
    vector = ellipse_pred.numpy().astype(np.float64)
    return Prediction(probs, vector, denormalize_ellipse(vector, height, width))


def evaluate_sample(params, contour, with_tuner, sample):
    prediction = predict(params, sample.image)
    report = evaluate_case(
        prediction.probs, sample.mask, sample.ellipse, sample.pixel_size_mm, sample.id, contour
    )
    if not with_tuner:
        return report, None
    height, width = sample.image.shape
    tuner = evaluate_tuner(
        sample.id,
        prediction.tuner_vector,
        to_vector(normalize_ellipse(sample.ellipse, height, width)),
        prediction.tuner_ellipse,
        circumference_mm(sample.ellipse, sample.pixel_size_mm),
        sample.pixel_size_mm,
    )
    return report, tuner


def evaluate_model(checkpoint, manifest, samples, split, executor=None, contour=True):
    wanted = {r.id for r in manifest.split(split)}
    samples = sorted((s for s in samples if s.id in wanted), key=lambda s: s.id)
    if not samples:
        raise ValueError(f"Split '{split}' has no samples to evaluate")
    params = restore_params(checkpoint)
    with_tuner = is_multi_task(checkpoint)
    evaluate = partial(evaluate_sample, params, contour, with_tuner)
    results = list(map(evaluate, samples) if executor is None else executor.map(evaluate, samples))
    reports = [r for r, _ in results]
    summary = summarize_reports(reports)
    logging.info(
        f"Evaluated {len(reports)} cases on split '{split}', {summary['failed']} failed"
    )
    return Evaluation(reports, summary, [t for _, t in results] if with_tuner else None)
