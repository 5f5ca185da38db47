# core/report.py
"""Écriture des rapports : CSV (métriques, courbe de perte, benchmark), JSON, Excel, HTML."""
import json
import logging
from pathlib import Path
from typing import Union

import pandas as pd
import plotly.express as px

from core.metrics import METRICS, MetricsReport
from utils.file_loader import atomic_write

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def metrics_csv_text(report: MetricsReport) -> str:
    """
    Lignes par image (image,mse,mae_deg,de2000) suivies d'un bloc de synthèse
    en lignes commentées (# statistique,mse,mae_deg,de2000).
    """
    text = report.per_image.to_csv(index=False, float_format="%.6f")
    lines = ["# summary", "# statistic," + ",".join(METRICS)]
    for stat in report.aggregates.columns:
        values = ",".join(f"{report.aggregates.loc[m, stat]:.6f}" for m in METRICS)
        lines.append(f"# {stat},{values}")
    return text + "\n".join(lines) + "\n"


def save_metrics_csv(report: MetricsReport, path: PathLike) -> Path:
    path = Path(path)
    with atomic_write(path, "w") as fh:
        fh.write(metrics_csv_text(report))
    return path


def save_metrics_json(report: MetricsReport, path: PathLike) -> Path:
    path = Path(path)
    with atomic_write(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    return path


def save_metrics_excel(report: MetricsReport, path: PathLike) -> Path:
    """Classeur à deux feuilles : résultats par image et synthèse."""
    from openpyxl.styles import Alignment, Font, PatternFill

    path = Path(path)
    summary = report.aggregates.rename_axis("metric").reset_index()
    with atomic_write(path) as fh:
        with pd.ExcelWriter(fh, engine="openpyxl") as xw:
            report.per_image.to_excel(xw, sheet_name="Par image", index=False)
            summary.to_excel(xw, sheet_name="Synthèse", index=False)
            head_fill = PatternFill(start_color="FFDADADA", end_color="FFDADADA", fill_type="solid")
            for name in ("Par image", "Synthèse"):
                ws = xw.book[name]
                for cell in ws[1]:
                    cell.fill = head_fill
                    cell.font = Font(bold=True)
                    cell.alignment = Alignment(vertical="top")
                ws.column_dimensions["A"].width = 32
                for col in ("B", "C", "D", "E"):
                    ws.column_dimensions[col].width = 14
    return path


def save_frame_csv(df: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    with atomic_write(path, "w") as fh:
        df.to_csv(fh, index=False)
    return path


def save_loss_plot(curve: pd.DataFrame, path: PathLike) -> Path:
    """Courbe de perte par pixel en HTML autonome."""
    path = Path(path)
    fig = px.line(curve, x="step", y="loss_per_pixel", log_y=True, title="Perte de reconstruction par pixel")
    with atomic_write(path, "w") as fh:
        fh.write(fig.to_html(include_plotlyjs="cdn"))
    return path
