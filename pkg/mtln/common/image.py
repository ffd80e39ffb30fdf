import cv2
import math
import numpy as np
from scipy import ndimage

PGM_MAGIC = b"P5"
PGM_MAXVAL = 255


class PgmError(ValueError):
    pass


def to_uint8(image):
    return np.round(np.clip(image, 0.0, 1.0) * PGM_MAXVAL).astype(np.uint8)


def write_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM images must be 2D, got shape {image.shape}")
    if image.dtype == bool:
        data = image.astype(np.uint8) * PGM_MAXVAL
    elif image.dtype == np.uint8:
        data = image
    else:
        data = to_uint8(image)
    ok, encoded = cv2.imencode(".pgm", np.ascontiguousarray(data), [cv2.IMWRITE_PXM_BINARY, 1])
    if not ok:
        raise PgmError(f"Could not encode {path} as PGM")
    encoded.tofile(path)


def read_pgm(path):
    data = np.fromfile(path, dtype=np.uint8)
    if data[:2].tobytes() != PGM_MAGIC:
        raise PgmError(f"{path} is not a binary PGM (P5) file, got magic {data[:2].tobytes()!r}")
    try:
        image = cv2.imdecode(data, cv2.IMREAD_UNCHANGED)
    except cv2.error as e:
        raise PgmError(f"{path} could not be decoded: {e}") from e
    if image is None:
        raise PgmError(f"{path} is truncated or malformed")
    if image.ndim != 2 or image.dtype != np.uint8:
        raise PgmError(
            f"Only 8-bit greyscale PGM files are supported, {path} decodes to {image.dtype}"
        )
    return image


def read_image(path):
    return read_pgm(path).astype(np.float32) / PGM_MAXVAL


def read_mask(path):
    return read_pgm(path) > PGM_MAXVAL // 2


def resize(image, shape, order):
    """Resample `image` onto `shape` by mapping pixel centres, bilinear for order=1."""
    image = np.asarray(image)
    if image.shape == tuple(shape):
        return image.copy()
    height, width = shape
    scale_y = image.shape[0] / height
    scale_x = image.shape[1] / width
    y = (np.arange(height) + 0.5) * scale_y - 0.5
    x = (np.arange(width) + 0.5) * scale_x - 0.5
    grid = np.stack(np.meshgrid(y, x, indexing="ij"))
    resampled = ndimage.map_coordinates(
        image.astype(np.float64), grid, order=order, mode="nearest"
    )
    if image.dtype == bool:
        return resampled > 0.5
    return resampled.astype(image.dtype)


def image_center(shape):
    height, width = shape
    return (width - 1) / 2, (height - 1) / 2


def rotate_points(x, y, angle, center):
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    dx, dy = x - center[0], y - center[1]
    return center[0] + cos_a * dx - sin_a * dy, center[1] + sin_a * dx + cos_a * dy


def rotate(image, angle, order):
    """Rotate image content by `angle` radians about the frame centre, zero fill outside."""
    image = np.asarray(image)
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    cx, cy = image_center(image.shape)
    # Maps output (row, col) back to input (row, col).
    matrix = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
    center = np.array([cy, cx])
    offset = center - matrix @ center
    rotated = ndimage.affine_transform(
        image.astype(np.float64), matrix, offset=offset, order=order, mode="constant", cval=0.0
    )
    if image.dtype == bool:
        return rotated > 0.5
    return rotated.astype(image.dtype)
