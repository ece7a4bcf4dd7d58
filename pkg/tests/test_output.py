import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from slagflow.curve import MarkedCurve
from slagflow.output import dumps, read_svg_polylines, read_timeseries, render_svg, write_svg, write_timeseries

FROZEN_COLUMNS = [
    "tau",
    "sup_theta",
    "inf_theta",
    "weighted_volume",
    "min_root_dist",
    "max_curvature_dc",
    "dt",
    "theta_bar",
    "l2_phase_var",
]

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
documents = st.recursive(
    st.none() | st.booleans() | st.integers(-(10**12), 10**12) | finite | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=6), inner, max_size=4),
    max_leaves=20,
)


@settings(max_examples=200, deadline=None)
@given(documents)
def test_json_round_trip_is_byte_identical(doc):
    text = dumps(doc)
    assert dumps(json.loads(text)) == text


def test_numpy_values_serialise_as_plain_json():
    text = dumps({"a": np.float64(0.1), "b": np.int64(3), "c": np.array([1.0, 2.0]), "d": np.bool_(True)})
    assert json.loads(text) == {"a": 0.1, "b": 3, "c": [1.0, 2.0], "d": True}
    assert dumps(json.loads(text)) == text


def test_curve_json_round_trip():
    c = MarkedCurve(np.array([0j, 0.5 + 0.25j, 1 + 0j]), 0, 1, 0.5, 2, 1)
    again = MarkedCurve.from_json(json.loads(dumps(c.to_json())))
    np.testing.assert_array_equal(again.points, c.points)
    assert (again.left_root, again.right_root, again.grading_offset, again.sheet) == (0, 1, 2, 1)


def test_timeseries_header_and_values(tmp_path):
    rows = [tuple(float(k + i) / 3 for i in range(len(FROZEN_COLUMNS))) for k in range(3)]
    write_timeseries(tmp_path / "t.csv", rows)
    header, data = read_timeseries(tmp_path / "t.csv")
    assert header == FROZEN_COLUMNS
    np.testing.assert_array_equal(data, np.array(rows))


def test_svg_keeps_exact_points(tmp_path):
    curve = np.array([-1 + 0j, 0.1 + 0.3j, 1 + 0j])
    ref = np.array([-1 + 0j, 1 + 0j])
    write_svg(tmp_path / "s.svg", [curve], [-1, 1], [ref], label="step 0")
    back = read_svg_polylines(tmp_path / "s.svg")
    np.testing.assert_array_equal(back["curve"][0], curve)
    np.testing.assert_array_equal(back["reference"][0], ref)


def test_svg_draws_roots_and_light_references():
    svg = render_svg([np.array([0j, 1 + 1j])], [0j, 1 + 1j, 2 + 0j], [np.array([0j, 2 + 0j])])
    assert svg.count('class="root"') == 3
    assert 'class="reference" fill="none" stroke="#bbbbbb"' in svg
    assert 'class="curve" fill="none" stroke="black"' in svg
    assert render_svg([np.array([0j, 1 + 1j])], [0j]) == render_svg([np.array([0j, 1 + 1j])], [0j])
