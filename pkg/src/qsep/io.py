"""File formats: dataset CSV + JSON sidecar, matrix dumps, model JSON."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import ann
from .experiment import Dataset

DATASET_HEADER = ("theta", "phi", "p", "f1", "f2", "f3", "f4", "label", "seed")


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_dataset(ds: Dataset, path, matrices: bool = False) -> Path:
    """Write the dataset CSV and its provenance sidecar; optionally dump matrices."""
    path = Path(path)
    seed = ds.provenance.get("seed", "")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for i in range(len(ds)):
            w.writerow([fmt(ds.theta[i]), fmt(ds.phi[i]), fmt(ds.p[i]),
                        *(fmt(v) for v in ds.features[i]), int(ds.labels[i]), seed])
    write_json(sidecar_path(path), ds.provenance)
    if matrices and ds.reconstructed is not None:
        write_matrices(ds.reconstructed, path.with_name(path.stem + "_reconstructed.csv"))
    return path


def read_dataset(path) -> Dataset:
    path = Path(path)
    rows = list(csv.DictReader(path.open()))
    if not rows:
        raise ValueError(f"{path} holds no samples")
    if tuple(rows[0].keys()) != DATASET_HEADER:
        raise ValueError(f"{path}: unexpected header {tuple(rows[0].keys())}")
    col = lambda k: np.array([float(r[k]) for r in rows])
    side = sidecar_path(path)
    provenance = read_json(side) if side.exists() else {}
    return Dataset(
        theta=col("theta"),
        phi=col("phi"),
        p=col("p"),
        features=np.column_stack([col(f"f{k}") for k in range(1, 5)]),
        labels=np.array([int(r["label"]) for r in rows], dtype=np.int64),
        provenance=provenance,
    )


def write_matrices(mats, path) -> None:
    """One row per 4x4 matrix: 16 entries row-major, real and imaginary parts interleaved."""
    mats = np.asarray(mats, dtype=complex).reshape(-1, 16)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{part}{i}{j}" for i in range(4) for j in range(4) for part in ("re", "im")])
        for m in mats:
            w.writerow([fmt(v) for z in m for v in (z.real, z.imag)])


def read_matrices(path) -> np.ndarray:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        next(r)
        flat = np.array([[float(v) for v in row] for row in r])
    return (flat[:, 0::2] + 1j * flat[:, 1::2]).reshape(-1, 4, 4)


def model_to_dict(model, plan: dict, threshold: float = 0.5, train_config=None,
                  dataset_provenance=None) -> dict:
    return {
        "arch": model.arch,
        "n_ne": int(model.n_ne),
        "weights": [float(f"{w:.17g}") for w in model.to_vector()],
        "plan": plan,
        "threshold": threshold,
        "train_config": train_config,
        "dataset_provenance": dataset_provenance,
    }


def save_model(path, model, **meta) -> None:
    write_json(path, model_to_dict(model, **meta))


def load_model(path):
    """Return ``(model, meta)`` from a model JSON file."""
    d = read_json(path)
    model = ann.model_from_vector(d["arch"], d["weights"], int(d["n_ne"]))
    return model, d
