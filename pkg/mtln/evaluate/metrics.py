import logging
import numpy as np
from collections import namedtuple
from scipy.spatial.distance import cdist

from mtln.common.ellipse import boundary_mask
from mtln.common.ellipse import circumference_mm
from mtln.common.ellipse import fit_ellipse

THRESHOLD = 0.5

MetricsReport = namedtuple(
    "MetricsReport",
    ["case_id", "dsc", "hc_pred_mm", "hc_gt_mm", "df_mm", "adf_mm", "hd_px", "hd_mm", "failed"],
)
TunerReport = namedtuple(
    "TunerReport", ["case_id", "mse", "hc_tuner_mm", "hc_gt_mm", "df_mm", "adf_mm"]
)


def _check_same_shape(seg, gt):
    if seg.shape != gt.shape:
        raise ValueError(f"Masks must have the same shape, got {seg.shape} and {gt.shape}")


def dice_score(seg, gt):
    seg, gt = np.asarray(seg, dtype=bool), np.asarray(gt, dtype=bool)
    _check_same_shape(seg, gt)
    total = int(seg.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2 * int((seg & gt).sum()) / total


def surface_points(mask, contour=True):
    if contour:
        points = np.argwhere(boundary_mask(mask))
        # A mask filling the whole frame has no contour inside it.
        if len(points):
            return points
    return np.argwhere(mask)


def directed_hausdorff(points, other):
    return float(cdist(points, other).min(axis=1).max())


def hausdorff_distance(seg, gt, contour=True):
    seg, gt = np.asarray(seg, dtype=bool), np.asarray(gt, dtype=bool)
    _check_same_shape(seg, gt)
    if not seg.any() or not gt.any():
        raise ValueError("Hausdorff distance is undefined for an empty mask")
    s, r = surface_points(seg, contour), surface_points(gt, contour)
    return max(directed_hausdorff(s, r), directed_hausdorff(r, s))


def circumference_differences(hc_pred_mm, hc_gt_mm):
    if hc_pred_mm <= 0 or hc_gt_mm <= 0:
        raise ValueError(
            f"Circumferences must be positive, got pred={hc_pred_mm}, gt={hc_gt_mm}"
        )
    df = hc_pred_mm - hc_gt_mm
    return df, abs(df)


def failed_report(case_id, hc_gt_mm):
    return MetricsReport(case_id, None, None, hc_gt_mm, None, None, None, None, True)


def evaluate_case(seg_probs, gt_mask, gt_ellipse, pixel_size_mm, case_id="", contour=True):
    seg = np.asarray(seg_probs) >= THRESHOLD
    gt_mask = np.asarray(gt_mask, dtype=bool)
    _check_same_shape(seg, gt_mask)
    hc_gt_mm = circumference_mm(gt_ellipse, pixel_size_mm)
    try:
        hc_pred_mm = circumference_mm(fit_ellipse(seg), pixel_size_mm)
    except ValueError as e:
        logging.warning(f"Caught exception for case={case_id}, error={e}")
        return failed_report(case_id, hc_gt_mm)
    df, adf = circumference_differences(hc_pred_mm, hc_gt_mm)
    hd_px = hausdorff_distance(seg, gt_mask, contour)
    return MetricsReport(
        case_id,
        dice_score(seg, gt_mask),
        hc_pred_mm,
        hc_gt_mm,
        df,
        adf,
        hd_px,
        hd_px * pixel_size_mm,
        False,
    )


def evaluate_tuner(case_id, pred_vector, target_vector, tuner_ellipse, hc_gt_mm, pixel_size_mm):
    mse = float(np.mean((np.asarray(pred_vector) - np.asarray(target_vector)) ** 2))
    try:
        hc_tuner_mm = circumference_mm(tuner_ellipse.canonical(), pixel_size_mm)
        df, adf = circumference_differences(hc_tuner_mm, hc_gt_mm)
    except ValueError as e:
        logging.warning(f"Caught exception for case={case_id}, error={e}")
        return TunerReport(case_id, mse, None, hc_gt_mm, None, None)
    return TunerReport(case_id, mse, hc_tuner_mm, hc_gt_mm, df, adf)
