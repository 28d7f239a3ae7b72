import math
import xml.etree.ElementTree as ET

from ernn.svg import line_chart, write_chart

NS = "{http://www.w3.org/2000/svg}"


def test_chart_is_valid_svg_with_one_polyline_per_series():
    doc = line_chart({"a": ([0, 1, 2], [0, 1, 4]), "b": ([0, 2], [1, 1])}, title="t<1>", xlabel="x", ylabel="y")
    root = ET.fromstring(doc)
    assert root.tag == NS + "svg"
    assert len(root.findall(NS + "polyline")) == 2
    texts = [t.text for t in root.iter(NS + "text")]
    assert "t<1>" in texts and "a" in texts and "b" in texts


def test_nonfinite_points_split_the_line():
    root = ET.fromstring(line_chart({"s": ([0, 1, 2, 3, 4], [1, 2, None, 3, math.inf])}))
    lines = root.findall(NS + "polyline")
    assert [len(pl.get("points").split()) for pl in lines] == [2, 1]


def test_degenerate_ranges(tmp_path):
    ET.fromstring(line_chart({}))
    ET.fromstring(line_chart({"flat": ([1, 1], [2, 2])}))
    write_chart(tmp_path / "c.svg", {"s": ([0, 1], [0, 1])})
    assert (tmp_path / "c.svg").read_text().startswith("<svg")
