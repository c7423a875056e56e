import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psdreg import dataio
from psdreg.applications import LabeledDataset
from psdreg.errors import ConfigurationError, DataError, FormatError
from psdreg.optim import FitReport
from psdreg.regression import (ConeAffineModel, ConeLogModel, FlatModel, SampleSet,
                               empirical_cost, model_from_factor)


def test_load_dataset_basic(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2,0\n3,4,1\n5,6,0\n")
    ds = dataio.load_dataset(p)
    assert ds.n == 3 and ds.d == 2
    np.testing.assert_array_equal(ds.labels, [0, 1, 0])
    q = tmp_path / "b.csv"
    q.write_text("0;1;2\n1;3;4\n")
    ds = dataio.load_dataset(q, label_column=0, delimiter=";")
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(ds.labels, [0, 1])


def test_load_dataset_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    ds = LabeledDataset(rng.standard_normal((7, 3)), rng.integers(0, 3, 7))
    dataio.save_dataset(tmp_path / "x.csv", ds)
    back = dataio.load_dataset(tmp_path / "x.csv")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


@pytest.mark.parametrize("text,line", [("1,2,0\n3,4\n", 2), ("1,2,0\n1,x,1\n", 2),
                                       ("1,2,0.5\n", 1)])
def test_load_dataset_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError) as info:
        dataio.load_dataset(p)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_load_dataset_missing_label_column(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("1\n2\n")
    with pytest.raises(DataError):
        dataio.load_dataset(p)
    with pytest.raises(DataError):
        dataio.load_dataset(p, label_column=3)


def test_normalize():
    X = np.array([[0.0, 5.0], [2.0, 5.0]])
    ds, tr = dataio.normalize(LabeledDataset(X, [0, 1]))
    np.testing.assert_allclose(ds.features[:, 0], [-1.0, 1.0])
    np.testing.assert_array_equal(ds.features[:, 1], [0.0, 0.0])
    assert tr.constant.tolist() == [False, True] and tr.scale[1] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10000))
def test_normalize_properties(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 4)) * rng.uniform(0.1, 10, 4) + rng.uniform(-5, 5, 4)
    once, _ = dataio.normalize(LabeledDataset(X, np.zeros(20, int)))
    twice, _ = dataio.normalize(once)
    assert np.abs(once.features.mean(axis=0)).max() <= 1e-10
    np.testing.assert_allclose(once.features.std(axis=0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(twice.features, once.features, atol=1e-12)


def test_synth_regression():
    spec = dataio.SyntheticSpec(d=6, r=2, n_train=50, n_test=20, noise_std=0.0, seed=3)
    prob = dataio.synth_regression(spec)
    assert empirical_cost(prob.truth, prob.train) == pytest.approx(0.0, abs=1e-20)
    assert len(prob.train) == 50 and len(prob.test) == 20
    assert np.all(prob.train.rho == 0)
    again = dataio.synth_regression(spec)
    np.testing.assert_array_equal(again.train.data, prob.train.data)
    np.testing.assert_array_equal(again.test.targets, prob.test.targets)
    assert dataio.SyntheticSpec().noise_std ** 2 == pytest.approx(0.01)


def test_synth_noise_level():
    spec = dataio.SyntheticSpec(d=5, r=2, n_train=20000, n_test=1, noise_std=0.1, seed=0)
    prob = dataio.synth_regression(spec)
    nu = prob.train.targets / prob.truth.predict(prob.train) - 1
    assert np.var(nu) == pytest.approx(0.01, rel=0.05)


def test_synth_spec_validation():
    with pytest.raises(ConfigurationError):
        dataio.SyntheticSpec(d=2, r=3)
    with pytest.raises(ConfigurationError):
        dataio.SyntheticSpec(n_train=0)
    with pytest.raises(ConfigurationError):
        dataio.SyntheticSpec(noise_std=-1)


def test_split():
    assert sorted(np.bincount(dataio.split(10, 2, 1, 0)[0])) == [5, 5]
    assert sorted(np.bincount(dataio.split(11, 2, 1, 0)[0])) == [5, 6]
    reps = dataio.split(23, 3, 4, 9)
    assert len(reps) == 4
    for a in reps:
        folds = [set(np.flatnonzero(a == f)) for f in range(3)]
        assert set().union(*folds) == set(range(23))
        assert sum(len(f) for f in folds) == 23
    assert not np.array_equal(reps[0], reps[1])
    np.testing.assert_array_equal(dataio.split(23, 3, 4, 9)[2], reps[2])
    with pytest.raises(ConfigurationError):
        dataio.split(3, 4)
    with pytest.raises(ConfigurationError):
        dataio.split(3, 1)


def test_model_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    G = rng.standard_normal((4, 2))
    dataio.save_model(tmp_path / "f.psdr", FlatModel(G))
    assert np.array_equal(dataio.load_model(tmp_path / "f.psdr").G, G)
    P = model_from_factor("polar", rng.standard_normal((6, 3)))
    dataio.save_model(tmp_path / "p.psdr", P)
    Q = dataio.load_model(tmp_path / "p.psdr")
    assert np.array_equal(Q.U, P.U) and np.array_equal(Q.R, P.R)
    res = np.linalg.norm(P.U.T @ P.U - np.eye(3))
    assert np.linalg.norm(Q.U.T @ Q.U - np.eye(3)) == res
    W = G @ G.T + np.eye(4)
    for m in (ConeAffineModel(W), ConeLogModel.from_spd(W)):
        back = dataio.parse_model(dataio.dump_model(m))
        assert np.array_equal(back.params(), m.params())
    blob = (tmp_path / "f.psdr").read_bytes()
    assert blob.startswith(b"PSDR1 flat 4 2\n")
    assert len(blob) == len(b"PSDR1 flat 4 2\n") + 8 * 8


def test_model_file_errors():
    blob = dataio.dump_model(FlatModel(np.eye(3)[:, :2]))
    with pytest.raises(FormatError):
        dataio.parse_model(blob.replace(b"PSDR1", b"PSDR2"))
    with pytest.raises(FormatError):
        dataio.parse_model(blob[:-8])
    with pytest.raises(FormatError):
        dataio.parse_model(b"no header")
    with pytest.raises(FormatError):
        dataio.parse_model(blob.replace(b"flat", b"blob"))


def test_constraints_roundtrip(tmp_path):
    ss = SampleSet.pairs([(0, 1), (2, 3), (4, 0)], 5, [1.5, 0.25, 3.0], [0, 1, -1])
    dataio.save_constraints(tmp_path / "c.txt", ss)
    assert (tmp_path / "c.txt").read_text().splitlines()[1] == "2 3 0.25 le"
    back = dataio.load_constraints(tmp_path / "c.txt", 5)
    np.testing.assert_array_equal(back.data, ss.data)
    np.testing.assert_array_equal(back.targets, ss.targets)
    np.testing.assert_array_equal(back.rho, ss.rho)
    (tmp_path / "bad.txt").write_text("0 1 1.0 eq\n0 9 1.0 eq\n")
    with pytest.raises(DataError) as info:
        dataio.load_constraints(tmp_path / "bad.txt", 5)
    assert info.value.line == 2


def test_regression_table_roundtrip(tmp_path):
    ss = SampleSet.rank_one(np.random.default_rng(2).standard_normal((5, 3)), np.arange(5.0))
    dataio.save_regression(tmp_path / "r.csv", ss)
    back = dataio.load_regression(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.data, ss.data)
    np.testing.assert_array_equal(back.targets, ss.targets)


def test_report(tmp_path):
    rep = FitReport()
    rep.record(1.0, 0.0, np.nan, 0.0)
    rep.termination = "max-iters"
    payload = dataio.report_payload({"seed": 1}, rep, {"x": np.float64(2.0)})
    assert set(payload) == set(dataio.REPORT_KEYS)
    dataio.write_report(tmp_path / "r.json", payload)
    import json
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["grad_norm_history"] == [None]
    assert data["metrics"]["x"] == 2.0 and data["termination"] == "max-iters"
