import math
import numpy as np
from collections import namedtuple
from scipy import ndimage

_EllipseParams = namedtuple("EllipseParams", ["cx", "cy", "a", "b", "theta", "normalized"])

FOUR_CONNECTIVITY = ndimage.generate_binary_structure(2, 1)


class EllipseParams(_EllipseParams):
    """Ellipse centre (cx, cy), semi-axes a >= b and major-axis angle theta in [0, pi).

    x runs along image columns and y along rows; theta is measured from +x toward +y.
    `normalized` marks the unit-square parameterisation used as the regression target.
    """

    __slots__ = ()

    def __new__(cls, cx, cy, a, b, theta, normalized=False):
        return super().__new__(
            cls, float(cx), float(cy), float(a), float(b), float(theta), normalized
        )

    def canonical(self):
        a, b, theta = self.a, self.b, self.theta
        if a < b:
            a, b = b, a
            theta += math.pi / 2
        theta = math.fmod(theta, math.pi)
        if theta < 0:
            theta += math.pi
        if theta >= math.pi:
            theta = 0.0
        return EllipseParams(self.cx, self.cy, a, b, theta, self.normalized)

    def is_canonical(self):
        return self.a >= self.b > 0 and 0 <= self.theta < math.pi


def normalize_ellipse(e, height, width):
    if e.normalized:
        raise ValueError("Ellipse is already normalized")
    e = e.canonical()
    return EllipseParams(
        e.cx / width, e.cy / height, e.a / width, e.b / height, e.theta / math.pi, True
    )


def denormalize_ellipse(vector, height, width):
    cx, cy, a, b, theta = (float(v) for v in vector)
    return EllipseParams(cx * width, cy * height, a * width, b * height, theta * math.pi)


def to_vector(e):
    return np.array([e.cx, e.cy, e.a, e.b, e.theta])


def ellipse_point(e, t):
    cos_theta, sin_theta = math.cos(e.theta), math.sin(e.theta)
    u, v = e.a * math.cos(t), e.b * math.sin(t)
    return e.cx + u * cos_theta - v * sin_theta, e.cy + u * sin_theta + v * cos_theta


def ellipse_frame_coords(e, x, y):
    dx = np.asarray(x, dtype=np.float64) - e.cx
    dy = np.asarray(y, dtype=np.float64) - e.cy
    cos_theta, sin_theta = math.cos(e.theta), math.sin(e.theta)
    return dx * cos_theta + dy * sin_theta, -dx * sin_theta + dy * cos_theta


def rasterize_ellipse(e, height, width):
    if e.a < 1 or e.b < 1:
        raise ValueError(f"Ellipse axes must be at least 1 pixel, got a={e.a}, b={e.b}")
    y, x = np.mgrid[0:height, 0:width]
    u, v = ellipse_frame_coords(e, x, y)
    return (u / e.a) ** 2 + (v / e.b) ** 2 <= 1


def fit_ellipse(mask):
    mask = np.asarray(mask, dtype=bool)
    y, x = np.nonzero(mask)
    if len(x) < 5:
        raise ValueError(f"Ellipse fit needs at least 5 foreground pixels, got {len(x)}")
    cx, cy = x.mean(), y.mean()
    coords = np.stack([x - cx, y - cy])
    covariance = coords @ coords.T / len(x)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    if eigenvalues[0] <= 1e-12 * max(eigenvalues[1], 1.0):
        raise ValueError("Foreground pixels are collinear, cannot fit an ellipse")
    major = eigenvectors[:, 1]
    theta = math.atan2(major[1], major[0])
    return EllipseParams(
        cx, cy, 2 * math.sqrt(eigenvalues[1]), 2 * math.sqrt(eigenvalues[0]), theta
    ).canonical()


def ellipse_perimeter(e):
    if e.a <= 0 or e.b <= 0:
        raise ValueError(f"Ellipse axes must be positive, got a={e.a}, b={e.b}")
    h = ((e.a - e.b) / (e.a + e.b)) ** 2
    return math.pi * (e.a + e.b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))


def circumference_mm(e, pixel_size_mm):
    if pixel_size_mm <= 0:
        raise ValueError(f"Pixel size must be positive, got {pixel_size_mm}")
    return ellipse_perimeter(e) * pixel_size_mm


def boundary_mask(mask):
    # Frame edges do not count as background.
    mask = np.asarray(mask, dtype=bool)
    interior = ndimage.binary_erosion(mask, structure=FOUR_CONNECTIVITY, border_value=1)
    return mask & ~interior


def boundary_distance_map(mask):
    boundary = boundary_mask(mask)
    if not boundary.any():
        raise ValueError("Mask has no boundary, it is either empty or full")
    return ndimage.distance_transform_edt(~boundary)
