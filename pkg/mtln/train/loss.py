import numpy as np

from mtln.common.ellipse import boundary_distance_map
from mtln.train import functional as F
from mtln.train.tensor import Tensor

WEIGHT_MAP_FORMS = ("gaussian", "printed")


class LossConfig:
    def __init__(
        self,
        alpha1=1.0,
        alpha2=2.0,
        omega0=30.0,
        sigma=10.0,
        p_clip=1e-7,
        dice_smooth=1e-6,
        weight_map="gaussian",
    ):
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        self.omega0 = float(omega0)
        self.sigma = float(sigma)
        self.p_clip = float(p_clip)
        self.dice_smooth = float(dice_smooth)
        self.weight_map = weight_map
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError(f"Loss weights must be non-negative, got {alpha1}, {alpha2}")
        if self.omega0 < 0 or self.sigma <= 0:
            raise ValueError(f"Expected omega0 >= 0 and sigma > 0, got {omega0}, {sigma}")
        if not 0 < self.p_clip < 0.5:
            raise ValueError(f"p_clip must lie in (0, 0.5), got {p_clip}")
        if self.dice_smooth < 0:
            raise ValueError(f"dice_smooth must be non-negative, got {dice_smooth}")
        if weight_map not in WEIGHT_MAP_FORMS:
            raise ValueError(f"weight_map must be one of {WEIGHT_MAP_FORMS}, got {weight_map}")

    @classmethod
    def from_config(cls, config):
        return cls(**config)

    def single_task(self):
        return LossConfig(**{**vars(self), "alpha2": 0.0})


def boundary_weight_map(gt_mask, omega0, sigma, form="gaussian"):
    d = boundary_distance_map(gt_mask)
    if form == "printed":
        return 1 + omega0 * np.exp(d / (2 * sigma**2))
    return 1 + omega0 * np.exp(-(d**2) / (2 * sigma**2))


def _mask_like(gt_mask, tensor):
    gt_mask = np.asarray(gt_mask)
    if gt_mask.size != tensor.values.size or gt_mask.shape != tensor.shape[-gt_mask.ndim :]:
        raise ValueError(f"Mask of shape {gt_mask.shape} does not match prediction {tensor.dims}")
    return gt_mask.reshape(tensor.shape).astype(tensor.values.dtype)


def weighted_cross_entropy(seg_logits, gt_mask, w, p_clip):
    g = _mask_like(gt_mask, seg_logits)
    w = _mask_like(w, seg_logits)
    p = F.sigmoid(seg_logits)
    p_true = F.add(F.mul(p, 2 * g - 1), 1 - g)
    log_p = F.log(F.clamp(p_true, p_clip, 1 - p_clip))
    return F.scale(F.mean(F.mul(log_p, w)), -1)


def soft_dice_loss(seg_probs, gt_mask, dice_smooth):
    if seg_probs.values.min() < 0 or seg_probs.values.max() > 1:
        raise ValueError("Dice loss expects probabilities in [0, 1]")
    g = _mask_like(gt_mask, seg_probs)
    intersection = F.sum(F.mul(seg_probs, g))
    sizes = F.add(F.sum(seg_probs), float(g.sum()) + dice_smooth)
    ratio = F.divide(F.add(F.scale(intersection, 2), dice_smooth), sizes)
    return F.add(F.scale(ratio, -1), 1.0)


def segmentation_loss(seg_logits, gt_mask, config, weight_map=None):
    if weight_map is None:
        if config.omega0 > 0:
            weight_map = boundary_weight_map(
                gt_mask, config.omega0, config.sigma, config.weight_map
            )
        else:
            weight_map = np.ones(np.shape(gt_mask))
    ce = weighted_cross_entropy(seg_logits, gt_mask, weight_map, config.p_clip)
    dice = soft_dice_loss(F.sigmoid(seg_logits), gt_mask, config.dice_smooth)
    return F.add(ce, dice)


def ellipse_param_mse(pred, gt):
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    gt = gt if isinstance(gt, Tensor) else Tensor(gt)
    if pred.shape != gt.shape or pred.values.ndim != 1:
        raise ValueError(f"Ellipse vectors must have equal length, got {pred.dims} and {gt.dims}")
    return F.mean(F.square(F.sub(pred, gt)))


def total_loss(l_seg, l_et, config):
    return F.add(F.scale(l_seg, config.alpha1), F.scale(l_et, config.alpha2))


def compute_losses(seg_logits, ellipse_pred, example, config):
    l_seg = segmentation_loss(seg_logits, example["mask"], config, example.get("weight_map"))
    l_et = ellipse_param_mse(ellipse_pred, example["target"])
    return {
        "seg_loss": l_seg,
        "ellipse_loss": l_et,
        "total_loss": total_loss(l_seg, l_et, config),
    }
