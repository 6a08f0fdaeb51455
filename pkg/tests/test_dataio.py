import numpy as np
import pytest

from conftest import random_params
from matmed.dataio import export_dataset, ingest, preprocess
from matmed.errors import DataFormatError
from matmed.model import MatrixDataset, simulate_dataset


@pytest.fixture
def small_data(rng):
    theta = random_params(rng, p=3, q=2, p0=1, q0=1, K=2)
    data, _ = simulate_dataset(theta, 5, rng)
    return data


def test_round_trip_exact(tmp_path, small_data):
    export_dataset(small_data, tmp_path / "m.csv", tmp_path / "s.csv")
    back, ids = ingest(tmp_path / "m.csv", tmp_path / "s.csv")
    assert np.array_equal(back.X, small_data.X)
    assert np.array_equal(back.E, small_data.E)
    assert np.array_equal(back.Z, small_data.Z)
    assert np.array_equal(back.Y, small_data.Y)
    assert ids == list(range(5))


def test_ingest_two_subjects(tmp_path):
    (tmp_path / "m.csv").write_text(
        "subject_id,row_index,col_index,value\n"
        "a,0,0,1\na,0,1,2\na,1,0,3\na,1,1,4\n"
        "b,0,0,5\nb,0,1,6\nb,1,0,7\nb,1,1,8\n")
    (tmp_path / "s.csv").write_text("subject_id,E,Y\na,1,0\nb,0,1\n")
    data, ids = ingest(tmp_path / "m.csv", tmp_path / "s.csv")
    assert data.n == 2 and data.p == 2 and data.q == 2
    assert ids == ["a", "b"]
    assert np.array_equal(data.X[0], [[1, 2], [3, 4]])


def test_ingest_duplicate_cell_named(tmp_path):
    (tmp_path / "m.csv").write_text(
        "subject_id,row_index,col_index,value\n"
        "a,0,0,1\na,0,0,2\na,1,0,3\na,1,1,4\n")
    (tmp_path / "s.csv").write_text("subject_id,E,Y\na,1,0\n")
    with pytest.raises(DataFormatError, match=r"row=0.*col=0|duplicate cell"):
        ingest(tmp_path / "m.csv", tmp_path / "s.csv")


def test_ingest_missing_cell(tmp_path):
    (tmp_path / "m.csv").write_text(
        "subject_id,row_index,col_index,value\n"
        "a,0,0,1\na,0,1,2\na,1,0,3\na,1,1,4\n"
        "b,0,0,5\nb,0,1,6\nb,1,0,7\n")
    (tmp_path / "s.csv").write_text("subject_id,E,Y\na,1,0\nb,0,1\n")
    with pytest.raises(DataFormatError, match="ragged|incomplete"):
        ingest(tmp_path / "m.csv", tmp_path / "s.csv")


def test_ingest_nonbinary_outcome(tmp_path):
    (tmp_path / "m.csv").write_text(
        "subject_id,row_index,col_index,value\na,0,0,1\n")
    (tmp_path / "s.csv").write_text("subject_id,E,Y\na,1,2\n")
    with pytest.raises(DataFormatError, match="non-binary Y.*line 2"):
        ingest(tmp_path / "m.csv", tmp_path / "s.csv")


def test_ingest_unknown_subject(tmp_path):
    (tmp_path / "m.csv").write_text(
        "subject_id,row_index,col_index,value\na,0,0,1\nzz,0,0,1\n")
    (tmp_path / "s.csv").write_text("subject_id,E,Y\na,1,0\n")
    with pytest.raises(DataFormatError, match="missing from subjects"):
        ingest(tmp_path / "m.csv", tmp_path / "s.csv")


def test_preprocess_center_scale_moments(small_data):
    out = preprocess(small_data, "center+scale")
    assert np.max(np.abs(out.X.mean(axis=0))) < 1e-10
    assert np.max(np.abs(np.mean(out.X ** 2, axis=0) - 1.0)) < 1e-10


def test_preprocess_hand_computed():
    X = np.zeros((3, 1, 2))
    X[:, 0, 0] = [1.0, 2.0, 6.0]
    X[:, 0, 1] = [0.0, 0.0, 0.0]
    data = MatrixDataset(X=X, E=np.zeros(3), Z=np.zeros((3, 0)), Y=np.zeros(3))
    mean = 3.0
    sd = np.sqrt(((1 - 3) ** 2 + (2 - 3) ** 2 + (6 - 3) ** 2) / 3)
    with pytest.warns(UserWarning):
        out = preprocess(data, "center+scale")
    assert np.allclose(out.X[:, 0, 0], (np.array([1, 2, 6]) - mean) / sd, atol=1e-12)
    assert np.allclose(out.X[:, 0, 1], 0.0)


def test_preprocess_center_only(small_data):
    out = preprocess(small_data, "center")
    assert np.max(np.abs(out.X.mean(axis=0))) < 1e-10
    assert not np.allclose(np.mean(out.X ** 2, axis=0), 1.0)


def test_preprocess_validation(small_data):
    with pytest.raises(DataFormatError):
        preprocess(small_data, "normalize")
    one = MatrixDataset(X=small_data.X[:1], E=small_data.E[:1], Z=small_data.Z[:1],
                        Y=small_data.Y[:1])
    with pytest.raises(DataFormatError):
        preprocess(one, "center+scale")
