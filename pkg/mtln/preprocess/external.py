import csv
import logging
from pathlib import Path

from mtln.common.ellipse import EllipseParams
from mtln.common.ellipse import rasterize_ellipse
from mtln.common.image import read_image
from mtln.preprocess.manifest import EXTERNAL_PREFIX
from mtln.preprocess.manifest import ManifestError
from mtln.preprocess.manifest import Sample
from mtln.preprocess.manifest import check_pixel_size

EXTERNAL_FIELDS = ["filename", "pixel_size_mm", "cx", "cy", "a", "b", "theta"]


def parse_external_row(line, row):
    if None in row or any(v is None for v in row.values()):
        raise ManifestError(line, "wrong number of columns")
    if not row["filename"]:
        raise ManifestError(line, "empty filename")
    try:
        pixel_size_mm, cx, cy, a, b, theta = (float(row[k]) for k in EXTERNAL_FIELDS[1:])
    except ValueError as e:
        raise ManifestError(line, f"malformed number: {e}") from e
    try:
        check_pixel_size(pixel_size_mm)
    except ValueError as e:
        raise ManifestError(line, str(e)) from e
    if a <= 0 or b <= 0:
        raise ManifestError(line, f"semi-axes must be positive, got a={a}, b={b}")
    ellipse = EllipseParams(cx, cy, a, b, theta)
    if not ellipse.is_canonical():
        ellipse = ellipse.canonical()
        logging.warning(
            f"line {line}: canonicalized ellipse of {row['filename']} to "
            f"a={ellipse.a}, b={ellipse.b}, theta={ellipse.theta}"
        )
    return row["filename"], pixel_size_mm, ellipse


def load_external(manifest_csv, image_dir, shape=(540, 800)):
    image_dir = Path(image_dir)
    with open(manifest_csv, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != EXTERNAL_FIELDS:
            raise ManifestError(1, f"expected header {','.join(EXTERNAL_FIELDS)}")
        rows = [parse_external_row(reader.line_num, row) for row in reader]

    samples = []
    for filename, pixel_size_mm, ellipse in rows:
        path = image_dir / filename
        if not path.exists():
            raise FileNotFoundError(f"Image {path} listed in {manifest_csv} does not exist")
        image = read_image(path)
        if image.shape != tuple(shape):
            raise ValueError(f"Image {path} has shape {image.shape}, expected {tuple(shape)}")
        sample_id = f"{EXTERNAL_PREFIX}{Path(filename).stem}"
        samples.append(
            Sample(
                sample_id,
                image,
                rasterize_ellipse(ellipse, *image.shape),
                ellipse,
                pixel_size_mm,
                "external",
                f"{sample_id}:orig",
            )
        )
    logging.info(f"Loaded {len(samples)} external images from {image_dir}")
    return samples
