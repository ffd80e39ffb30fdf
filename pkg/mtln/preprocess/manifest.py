import csv
import logging
from collections import namedtuple
from functools import partial
from pathlib import Path

from mtln.common.ellipse import EllipseParams
from mtln.common.image import read_image
from mtln.common.image import read_mask
from mtln.common.image import write_pgm

MANIFEST_FIELDS = [
    "id",
    "filename",
    "split",
    "pixel_size_mm",
    "cx",
    "cy",
    "a",
    "b",
    "theta",
    "lineage",
]
SPLITS = ("train", "val", "test")
UNASSIGNED = "unassigned"
PHANTOM_PREFIX = "phantom-"
EXTERNAL_PREFIX = "ext-"
PIXEL_SIZE_RANGE = (0.01, 1.0)

Sample = namedtuple(
    "Sample", ["id", "image", "mask", "ellipse", "pixel_size_mm", "provenance", "lineage"]
)
ManifestRecord = namedtuple(
    "ManifestRecord", ["id", "filename", "split", "pixel_size_mm", "ellipse", "lineage"]
)


class ManifestError(ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def base_id(lineage):
    return lineage.split(":", 1)[0]


def provenance_of(sample_id):
    return "phantom" if sample_id.startswith(PHANTOM_PREFIX) else "external"


def check_pixel_size(pixel_size_mm):
    low, high = PIXEL_SIZE_RANGE
    if not low <= pixel_size_mm <= high:
        raise ValueError(f"Pixel size must lie in [{low}, {high}] mm, got {pixel_size_mm}")
    return pixel_size_mm


class DatasetManifest:
    def __init__(self, records, seed=None):
        self.records = list(records)
        self.seed = seed
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("Manifest sample ids must be unique")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, DatasetManifest) and self.records == other.records

    @classmethod
    def from_samples(cls, samples, seed=None):
        return cls([record_of(s) for s in samples], seed=seed)

    def base_ids(self):
        return sorted({base_id(r.lineage) for r in self.records})

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def with_splits(self, assignment, seed=None):
        return DatasetManifest(
            [r._replace(split=assignment[base_id(r.lineage)]) for r in self.records],
            seed=self.seed if seed is None else seed,
        )


def record_of(sample, split=UNASSIGNED):
    return ManifestRecord(
        sample.id, f"{sample.id}.pgm", split, sample.pixel_size_mm, sample.ellipse, sample.lineage
    )


def write_manifest(path, manifest):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for r in manifest:
            e = r.ellipse
            writer.writerow(
                [
                    r.id,
                    r.filename,
                    r.split,
                    repr(float(r.pixel_size_mm)),
                    *(repr(v) for v in (e.cx, e.cy, e.a, e.b, e.theta)),
                    r.lineage,
                ]
            )


def _parse_record(line, row):
    try:
        values = [float(row[k]) for k in ("pixel_size_mm", "cx", "cy", "a", "b", "theta")]
    except (TypeError, ValueError) as e:
        raise ManifestError(line, f"malformed number: {e}") from e
    if row["split"] not in SPLITS + (UNASSIGNED,):
        raise ManifestError(line, f"unknown split '{row['split']}'")
    if not row["id"] or not row["lineage"]:
        raise ManifestError(line, "id and lineage must not be empty")
    pixel_size_mm, cx, cy, a, b, theta = values
    return ManifestRecord(
        row["id"],
        row["filename"],
        row["split"],
        pixel_size_mm,
        EllipseParams(cx, cy, a, b, theta),
        row["lineage"],
    )


def read_manifest(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise ManifestError(1, f"expected header {','.join(MANIFEST_FIELDS)}")
        records = []
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise ManifestError(reader.line_num, "wrong number of columns")
            records.append(_parse_record(reader.line_num, row))
    try:
        return DatasetManifest(records)
    except ValueError as e:
        raise ManifestError(len(records) + 1, str(e)) from e


def dataset_paths(directory):
    directory = Path(directory)
    return directory / "manifest.csv", directory / "images", directory / "masks"


def _write_sample_files(image_dir, mask_dir, sample):
    write_pgm(image_dir / f"{sample.id}.pgm", sample.image)
    write_pgm(mask_dir / f"{sample.id}.pgm", sample.mask)


def save_dataset(directory, samples, executor=None, seed=None):
    manifest_path, image_dir, mask_dir = dataset_paths(directory)
    image_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    write = partial(_write_sample_files, image_dir, mask_dir)
    if executor is None:
        for s in samples:
            write(s)
    else:
        list(executor.map(write, samples))
    manifest = DatasetManifest.from_samples(samples, seed=seed)
    write_manifest(manifest_path, manifest)
    logging.info(f"Wrote {len(samples)} samples to {directory}")
    return manifest


def load_sample(directory, record):
    _, image_dir, mask_dir = dataset_paths(directory)
    return Sample(
        record.id,
        read_image(image_dir / record.filename),
        read_mask(mask_dir / record.filename),
        record.ellipse,
        record.pixel_size_mm,
        provenance_of(record.id),
        record.lineage,
    )


def load_dataset(directory, split=None, executor=None):
    manifest_path, _, _ = dataset_paths(directory)
    if not manifest_path.exists():
        raise FileNotFoundError(f"No manifest found at {manifest_path}")
    manifest = read_manifest(manifest_path)
    records = manifest.records if split is None else manifest.split(split)
    load = partial(load_sample, directory)
    samples = list(map(load, records) if executor is None else executor.map(load, records))
    return manifest, samples
