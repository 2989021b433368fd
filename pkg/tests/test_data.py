import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerqnn.data import (
    BlochSample,
    arctan2,
    dataset_II_rule,
    generate_dataset,
    read_dataset,
    sample_dataset_I,
    sample_dataset_II,
    sample_from_magnetizations,
    to_dense_input,
    to_input_state,
    write_dataset,
)
from layerqnn.dense import magnetizations_dense
from layerqnn.mps import magnetizations


def test_arctan2_table():
    assert arctan2(0, 1) == 0
    assert arctan2(1, 0) == pytest.approx(math.pi / 2)
    assert arctan2(0, -1) == pytest.approx(math.pi)
    assert arctan2(-1, 0) == pytest.approx(-math.pi / 2)
    assert arctan2(-1, -1) == pytest.approx(-3 * math.pi / 4)
    with pytest.raises(ValueError):
        arctan2(0, 0)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_arctan2_matches_numpy(y, x):
    if x == 0 and y == 0:
        return
    ref = math.atan2(y, x)
    if ref == -math.pi:
        ref = math.pi
    assert arctan2(y, x) == pytest.approx(ref, abs=1e-12)


def test_theta_for_mz_quarter():
    s = sample_from_magnetizations("A", (math.sqrt(0.25 - 0.0625), 0.0, 0.25))
    assert s.theta == pytest.approx(math.pi / 3)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi, exclude_max=True))
def test_angle_round_trip(theta, phi):
    s = BlochSample("A", theta, phi)
    m = s.magnetizations
    assert np.linalg.norm(m) == pytest.approx(0.5, abs=1e-12)
    back = sample_from_magnetizations("A", m)
    assert back.theta == pytest.approx(theta, abs=1e-7)
    if 1e-6 < theta < math.pi - 1e-6:
        d = abs(back.phi - phi)
        assert min(d, 2 * math.pi - d) < 1e-7


def test_label_validation():
    with pytest.raises(ValueError):
        BlochSample("C", 0.0, 0.0)


def test_dataset_I_ranges():
    ds = sample_dataset_I(2000, np.random.default_rng(0))
    mz = ds.bloch_array()[:, 2]
    labels = ds.labels()
    assert np.all((mz[labels == "A"] >= 0.15) & (mz[labels == "A"] <= 0.4))
    assert np.all((mz[labels == "B"] >= -0.4) & (mz[labels == "B"] <= -0.15))
    assert np.allclose(np.linalg.norm(ds.bloch_array(), axis=1), 0.5, atol=1e-12)


def test_dataset_II_rules():
    ds = sample_dataset_II(2000, np.random.default_rng(1))
    for s in ds.samples:
        branch = 0 if s.theta == pytest.approx(math.pi / 4) else 1
        lo, hi = dataset_II_rule(s.label, branch)
        assert lo <= s.phi <= hi
    a = next(s for s in ds.samples if s.label == "A" and s.theta < 1)
    assert math.pi / 4 <= a.phi <= 3 * math.pi / 4
    assert BlochSample("A", math.pi / 4, 1.0).magnetizations[2] == pytest.approx(0.3535533906)


def test_dataset_II_not_separable_by_single_axis():
    ds = sample_dataset_II(2000, np.random.default_rng(2))
    m, labels = ds.bloch_array(), ds.labels()
    for axis in (1, 2):
        a, b = m[labels == "A", axis], m[labels == "B", axis]
        assert a.min() < b.max() and b.min() < a.max()


def test_count_validation():
    with pytest.raises(ValueError):
        sample_dataset_I(1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        generate_dataset("III", 10, 0)


def test_splits_disjoint():
    ds = generate_dataset("I", 30, 4, 25)
    assert len(ds.train) == 25 and len(ds.validation) == 5
    assert ds.train + ds.validation == ds.samples
    with pytest.raises(ValueError):
        ds.split(31)


def test_file_round_trip_and_determinism(tmp_path):
    ds = generate_dataset("II", 20, 7, 15)
    write_dataset(ds, tmp_path / "a.jsonl")
    write_dataset(generate_dataset("II", 20, 7, 15), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = read_dataset(tmp_path / "a.jsonl")
    assert back == ds


def test_read_rejects_count_mismatch(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"dataset": "I", "seed": 0, "count": 3}\n{"label": "A", "theta": 1.0, "phi": 0.0}\n')
    with pytest.raises(ValueError):
        read_dataset(path)


def test_input_states_reproduce_sample():
    s = generate_dataset("I", 5, 3).samples[0]
    assert np.allclose(magnetizations(to_input_state(s, 4)), s.magnetizations, atol=1e-12)
    assert np.allclose(magnetizations_dense(to_dense_input(s, 3), 3), s.magnetizations, atol=1e-12)
    vac = to_input_state(BlochSample("A", 0.0, 0.0), 3)
    assert np.allclose(magnetizations(vac), (0, 0, 0.5))
