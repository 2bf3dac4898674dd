"""
Tests for oml_stream.utils.charts module.
"""

import pandas as pd
import pytest

from oml_stream.core.evaluation import CURVE_COLUMNS
from oml_stream.utils.charts import (
    CHART_METRICS,
    final_metrics_table,
    render_metric_chart,
    render_report_charts,
)


def _curve(scale):
    rows = [
        [r, 0.5 * scale, 0.6 * scale, 0.55 * scale, 0.2 / scale, 0.1 * r]
        for r in (10, 20, 30)
    ]
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


@pytest.fixture
def curves():
    return {"desk_oml": _curve(1.2), "desk_knn_euclidean": _curve(1.0)}


class TestRenderCharts:
    """Test SVG output."""

    def test_one_chart_per_metric(self, curves, tmp_path):
        written = render_report_charts(curves, tmp_path / "report")
        assert [p.name for p in written] == [f"{m}.svg" for m in CHART_METRICS]
        for path in written:
            text = path.read_text()
            assert text.lstrip().startswith("<?xml")
            assert "desk_oml" in text

    def test_reproducible(self, curves, tmp_path):
        render_metric_chart(curves, "macro_f1", tmp_path / "a.svg")
        render_metric_chart(curves, "macro_f1", tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


class TestFinalMetricsTable:
    """Test the side-by-side table."""

    def test_last_rows(self, curves):
        table = final_metrics_table(curves)
        assert list(table.index) == ["desk_oml", "desk_knn_euclidean"]
        assert table.loc["desk_oml", "rounds"] == 30
        assert table.loc["desk_oml", "macro_f1"] == pytest.approx(0.6)
        assert table.loc["desk_knn_euclidean", "cumulative_loss"] == pytest.approx(3.0)
