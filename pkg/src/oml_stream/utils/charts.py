"""
SVG line charts for curve files, one chart per metric.
"""

import logging
from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

CHART_METRICS = ("macro_f1", "micro_f1", "example_f1", "hamming_loss")

_TITLES = {
    "macro_f1": "Macro-F1",
    "micro_f1": "Micro-F1",
    "example_f1": "Example-F1",
    "hamming_loss": "Hamming loss",
}


def render_metric_chart(
    curves: Mapping[str, pd.DataFrame], metric: str, path: str | Path
) -> None:
    """Plot ``metric`` against round for every named curve into an SVG file."""
    # fixed ids and no timestamp keep the SVG text reproducible
    with plt.rc_context({"svg.hashsalt": "oml-stream", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            for name, frame in curves.items():
                ax.plot(frame["round"], frame[metric], label=name, linewidth=1.2)
            ax.set_xlabel("round")
            ax.set_ylabel(_TITLES.get(metric, metric))
            ax.set_title(_TITLES.get(metric, metric))
            ax.grid(True, alpha=0.3)
            ax.legend(loc="best", fontsize="small")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.debug("wrote %s chart to %s", metric, path)


def render_report_charts(
    curves: Mapping[str, pd.DataFrame], out_dir: str | Path
) -> list[Path]:
    """One ``<metric>.svg`` per tracked metric in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in CHART_METRICS:
        path = out / f"{metric}.svg"
        render_metric_chart(curves, metric, path)
        written.append(path)
    return written


def final_metrics_table(curves: Mapping[str, pd.DataFrame]) -> pd.DataFrame:
    """Last curve row of each input, side by side."""
    rows = []
    for name, frame in curves.items():
        last = frame.iloc[-1]
        rows.append(
            {
                "name": name,
                "rounds": int(last["round"]),
                **{metric: float(last[metric]) for metric in CHART_METRICS},
                "cumulative_loss": float(last["cumulative_loss"]),
            }
        )
    return pd.DataFrame(rows).set_index("name")
