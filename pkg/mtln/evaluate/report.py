import csv
import numpy as np

from mtln.evaluate.metrics import MetricsReport
from mtln.evaluate.metrics import TunerReport

SUMMARY_ROWS = [
    ("DSC (%)", "dsc", 100.0),
    ("DF (mm)", "df_mm", 1.0),
    ("ADF (mm)", "adf_mm", 1.0),
    ("HD (mm)", "hd_mm", 1.0),
    ("HD (px)", "hd_px", 1.0),
]


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_reports(path, reports, fields):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fields)
        for report in reports:
            writer.writerow([format_value(v) for v in report])


def write_metrics(path, reports):
    write_reports(path, reports, MetricsReport._fields)


def write_tuner_reports(path, reports):
    write_reports(path, reports, TunerReport._fields)


def summarize_reports(reports):
    """Mean and standard deviation per metric over the cases that did not fail."""
    succeeded = [r for r in reports if not r.failed]
    summary = {"cases": len(reports), "failed": len(reports) - len(succeeded), "rows": []}
    for label, field, factor in SUMMARY_ROWS:
        values = np.array([getattr(r, field) for r in succeeded], dtype=np.float64) * factor
        if len(values):
            summary["rows"].append((label, float(values.mean()), float(values.std())))
        else:
            summary["rows"].append((label, float("nan"), float("nan")))
    return summary


def format_summary(summary):
    lines = [f"cases: {summary['cases']}, failed: {summary['failed']}"]
    lines += [f"{label}: {mean:.2f} ± {std:.2f}" for label, mean, std in summary["rows"]]
    return "\n".join(lines) + "\n"


def summarize_tuner(reports):
    mse = np.array([r.mse for r in reports], dtype=np.float64)
    adf = np.array([r.adf_mm for r in reports if r.adf_mm is not None], dtype=np.float64)
    return {
        "cases": len(reports),
        "mse": (float(mse.mean()), float(mse.std())) if len(mse) else (float("nan"),) * 2,
        "adf_mm": (float(adf.mean()), float(adf.std())) if len(adf) else (float("nan"),) * 2,
    }
