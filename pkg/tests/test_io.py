import csv
import json

import numpy as np
import pytest

from qsep import ann, io
from qsep import experiment as ex

SMALL = dict(thetas=ex.DEFAULT_THETAS[:2], p_grid=(0.1, 0.4, 0.7), shots=500)


@pytest.fixture(scope="module")
def small_ds():
    return ex.gen_linear_dataset(ex.ProtocolSpec.linear(**SMALL), ex.SourceModel(0.95, 0.98), "test")


def test_dataset_roundtrip(small_ds, tmp_path):
    path = io.write_dataset(small_ds, tmp_path / "d.csv", matrices=True)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == io.DATASET_HEADER
    assert len(rows) == len(small_ds) + 1
    assert all(r[7] in ("0", "1") and r[8] == str(ex.DEFAULT_SEED) for r in rows[1:])
    back = io.read_dataset(path)
    assert np.allclose(back.features, small_ds.features, rtol=1e-11, atol=1e-15)
    assert np.array_equal(back.labels, small_ds.labels)
    assert np.allclose(back.theta, small_ds.theta, rtol=1e-11)
    side = json.loads((tmp_path / "d.json").read_text())
    assert side["source"] == {"v": 0.95, "d": 0.98, "b": 0.0}
    assert side["plan"]["a0"] == [0.0, 0.0, 1.0]
    assert back.provenance == side
    mats = io.read_matrices(tmp_path / "d_reconstructed.csv")
    assert mats.shape == (len(small_ds), 4, 4)
    assert np.allclose(mats, small_ds.reconstructed, rtol=1e-11, atol=1e-14)


def test_float_format():
    assert io.fmt(1 / 3) == "0.333333333333"
    assert io.fmt(0.5) == "0.5"
    assert io.fmt(-1e-20) == "-1e-20"


def test_matrix_layout(tmp_path):
    m = np.arange(16).reshape(4, 4) + 1j * (100 + np.arange(16).reshape(4, 4))
    io.write_matrices([m], tmp_path / "m.csv")
    header, row = list(csv.reader((tmp_path / "m.csv").open()))
    assert len(header) == 32 and header[:4] == ["re00", "im00", "re01", "im01"]
    assert row[:4] == ["0", "100", "1", "101"]


def test_theory_dataset_has_no_seed(tmp_path):
    ds = ex.gen_theory_dataset(ex.ProtocolSpec.linear(**SMALL))
    io.write_dataset(ds, tmp_path / "t.csv")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert all(r[8] == "" for r in rows[1:])


def test_bad_files(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        io.read_dataset(tmp_path / "x.csv")
    (tmp_path / "e.csv").write_text(",".join(io.DATASET_HEADER) + "\n")
    with pytest.raises(ValueError):
        io.read_dataset(tmp_path / "e.csv")


def test_model_roundtrip_is_exact(tmp_path, rng):
    for model in (ann.LinearModel(rng.normal(size=4), rng.normal()),
                  ann.model_from_vector("mlp", rng.normal(size=6 * 5 + 1), 5)):
        io.save_model(tmp_path / "m.json", model, plan={"name": "xz"}, threshold=0.5)
        back, meta = io.load_model(tmp_path / "m.json")
        assert np.array_equal(back.to_vector(), model.to_vector())
        assert meta["arch"] == model.arch and meta["n_ne"] == model.n_ne
        assert meta["plan"] == {"name": "xz"}
