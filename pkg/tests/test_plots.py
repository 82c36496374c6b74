import math
import re
import xml.etree.ElementTree as ET

import pytest

from ctmoco.metrics import MetricRecord
from ctmoco.motion import nyquist_limit
from ctmoco.plots import emit_plots, render_chart
from ctmoco.sweep import SweepResult, aggregate


def make_result():
    records = []
    for seed in (0, 1):
        for f_c in (0.01, 0.05, 0.5):
            for n_nodes, ratio in ((10, 0.6), (30, 0.5)):
                records.append(
                    MetricRecord(
                        scan_seed=seed, f_c=f_c, n_nodes=n_nodes,
                        rpe_before=4.0, rpe_after=4.0 * ratio,
                        rpe_before_aligned=3.0,
                        rpe_after_aligned=3.0 * (ratio + 0.01 * seed),
                        rpe_ratio=ratio + 0.01 * seed,
                        ssim_before=0.6, ssim_after=0.7, ssim_ratio=0.7 / 0.6,
                    )
                )
    return SweepResult(tuple(records), tuple(aggregate(records)), 180)


def svg_root(text):
    return ET.fromstring(text)


def elements_by_class(root, cls):
    return [
        el for el in root.iter()
        if el.attrib.get("class") == cls
    ]


class TestRenderChart:
    def test_one_series_per_node_count(self):
        result = make_result()
        svg = render_chart(
            _series(result, "rpe_ratio"), 180, "title", "ratio"
        )
        root = svg_root(svg)
        series = elements_by_class(root, "series")
        assert sorted(el.attrib["data-nodes"] for el in series) == ["10", "30"]
        assert len(elements_by_class(root, "ci-band")) == 2

    def test_reference_lines_at_recoverable_limits(self):
        result = make_result()
        svg = render_chart(_series(result, "rpe_ratio"), 180, "t", "y")
        root = svg_root(svg)
        lines = elements_by_class(root, "nyquist-line")
        # one per node count plus the sampling bound at 0.5
        assert len(lines) == 3
        for el in lines:
            assert el.attrib["stroke-dasharray"]

    def test_x_positions_are_affine_in_log_frequency(self):
        result = make_result()
        svg = render_chart(_series(result, "rpe_ratio"), 180, "t", "y")
        root = svg_root(svg)
        line = elements_by_class(root, "series")[0]
        xs = [float(p.split(",")[0]) for p in line.attrib["points"].split()]
        fs = [0.01, 0.05, 0.5]
        # with three points, check collinearity of (log10 f, x)
        slope01 = (xs[1] - xs[0]) / (math.log10(fs[1]) - math.log10(fs[0]))
        slope12 = (xs[2] - xs[1]) / (math.log10(fs[2]) - math.log10(fs[1]))
        assert slope01 == pytest.approx(slope12, rel=1e-3)
        assert xs == sorted(xs)

    def test_limit_line_between_series_points(self):
        result = make_result()
        svg = render_chart(_series(result, "rpe_ratio"), 180, "t", "y")
        root = svg_root(svg)
        series = {
            el.attrib["data-nodes"]: el for el in elements_by_class(root, "series")
        }
        xs10 = [float(p.split(",")[0]) for p in series["10"].attrib["points"].split()]
        limit = nyquist_limit(10, 180)  # 0.0251..., between 0.01 and 0.05
        line_x = min(
            float(el.attrib["x1"]) for el in elements_by_class(root, "nyquist-line")
        )
        assert xs10[0] < line_x < xs10[1]

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            render_chart({10: []}, 180, "t", "y")

    def test_is_self_contained(self):
        svg = render_chart(_series(make_result(), "ssim_ratio"), 180, "t", "y")
        assert "href" not in svg and "url(" not in svg
        assert re.match(r"\s*<svg ", svg)


class TestEmitPlots:
    def test_writes_both_charts(self, tmp_path):
        written = emit_plots(make_result(), tmp_path)
        names = sorted(p.name for p in written)
        assert names == ["rpe_ratio.svg", "ssim_ratio.svg"]
        for path in written:
            root = svg_root(path.read_text())
            assert root.tag.endswith("svg")


def _series(result, name):
    series = {}
    for row in result.aggregates:
        series.setdefault(int(row["n_nodes"]), []).append(
            (row["f_c"], row[f"mean_{name}"], row[f"ci_{name}"])
        )
    return series
