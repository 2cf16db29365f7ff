"""Human- and machine-readable report emission: text table, CSV, figures."""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

from emoforensics.evaluation import EvalReport


def render_text_table(report: EvalReport) -> str:
    """Fixed-width table with one column per split plus the average."""
    names = [m.name for m in report.splits] + ["Average"]
    aucs = [m.auc for m in report.splits] + [report.average_auc]
    aps = [m.ap for m in report.splits]
    width = max(8, *(len(n) for n in names)) + 2
    lines = [
        "".join(f"{n:>{width}}" for n in [""] + names),
        "".join(f"{v:>{width}}" for v in ["AUC"] + [f"{a:.4f}" for a in aucs]),
    ]
    if aps:
        lines.append("".join(f"{v:>{width}}" for v in ["AP"] + [f"{a:.4f}" for a in aps] + [""]))
    lines.append(f"stability_area = {report.stability_area:.4f}")
    return "\n".join(lines) + "\n"


def write_csv(report: EvalReport, path: str | Path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["split", "auc", "ap", "num_real", "num_fake"])
    for m in report.splits:
        writer.writerow([m.name, repr(m.auc), repr(m.ap), m.num_real, m.num_fake])
    writer.writerow(["average", repr(report.average_auc), "", "", ""])
    writer.writerow(["stability_area", repr(report.stability_area), "", "", ""])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buffer.getvalue())
    os.replace(tmp, path)


def write_text_table(report: EvalReport, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(render_text_table(report))
    os.replace(tmp, path)
