"""CSV ingestion, export, and preprocessing.

Matrix file: header ``subject_id,row_index,col_index,value`` (0-based
indices, long format).  Subjects file: header ``subject_id,E,Y,Z1,...,ZK``.
Values are serialized with 17 significant digits so an export/ingest
round-trip is lossless.
"""

import warnings

import numpy as np
import pandas as pd

from .errors import DataFormatError
from .model import MatrixDataset

MATRIX_COLUMNS = ["subject_id", "row_index", "col_index", "value"]


def _line(idx: int) -> int:
    # dataframe row -> 1-based file line (header is line 1)
    return int(idx) + 2


def ingest(matrix_csv_path, subjects_csv_path):
    """Assemble a :class:`MatrixDataset`; returns ``(dataset, subject_ids)``.

    Subjects are ordered as in the subjects file; every subject needs a
    complete p x q matrix.
    """
    try:
        mat = pd.read_csv(matrix_csv_path, float_precision="round_trip")
        subj = pd.read_csv(subjects_csv_path, float_precision="round_trip")
    except Exception as exc:
        raise DataFormatError(f"cannot parse input files: {exc}") from exc

    if list(mat.columns) != MATRIX_COLUMNS:
        raise DataFormatError(
            f"matrix file must have header {','.join(MATRIX_COLUMNS)}, "
            f"got {','.join(map(str, mat.columns))}")
    base = ["subject_id", "E", "Y"]
    if list(subj.columns[:3]) != base:
        raise DataFormatError("subjects file must start with subject_id,E,Y")
    z_cols = list(subj.columns[3:])
    expected_z = [f"Z{k + 1}" for k in range(len(z_cols))]
    if z_cols != expected_z:
        raise DataFormatError(f"covariate columns must be {expected_z}, got {z_cols}")

    dup_s = subj["subject_id"].duplicated()
    if dup_s.any():
        i = int(np.flatnonzero(dup_s)[0])
        raise DataFormatError(
            f"duplicate subject_id {subj['subject_id'].iloc[i]!r} "
            f"at line {_line(subj.index[i])} of subjects file")

    bad_y = ~subj["Y"].isin([0, 1])
    if bad_y.any():
        i = int(np.flatnonzero(bad_y)[0])
        raise DataFormatError(
            f"non-binary Y={subj['Y'].iloc[i]!r} at line {_line(subj.index[i])} "
            f"of subjects file")

    dup = mat.duplicated(subset=["subject_id", "row_index", "col_index"])
    if dup.any():
        i = int(np.flatnonzero(dup)[0])
        r = mat.iloc[i]
        raise DataFormatError(
            f"duplicate cell (subject={r['subject_id']!r}, row={r['row_index']}, "
            f"col={r['col_index']}) at line {_line(mat.index[i])} of matrix file")

    if len(mat) == 0:
        raise DataFormatError("matrix file has no data rows")
    p = int(mat["row_index"].max()) + 1
    q = int(mat["col_index"].max()) + 1
    if int(mat["row_index"].min()) < 0 or int(mat["col_index"].min()) < 0:
        raise DataFormatError("matrix indices must be 0-based and nonnegative")

    subject_ids = list(subj["subject_id"])
    groups = {sid: g for sid, g in mat.groupby("subject_id", sort=False)}
    extra = set(groups) - set(subject_ids)
    if extra:
        raise DataFormatError(f"matrix file has subjects missing from subjects file: "
                              f"{sorted(map(str, extra))[:5]}")

    n = len(subject_ids)
    X = np.empty((n, p, q))
    for i, sid in enumerate(subject_ids):
        g = groups.get(sid)
        if g is None:
            raise DataFormatError(f"subject {sid!r} has no matrix rows")
        if len(g) != p * q:
            raise DataFormatError(
                f"subject {sid!r} has {len(g)} cells, expected {p}x{q}={p * q} "
                f"(ragged or incomplete matrix)")
        M = np.full((p, q), np.nan)
        M[g["row_index"].to_numpy(), g["col_index"].to_numpy()] = g["value"].to_numpy()
        if np.isnan(M).any():
            r, c = np.argwhere(np.isnan(M))[0]
            raise DataFormatError(f"subject {sid!r} is missing cell ({r}, {c})")
        X[i] = M

    Z = subj[z_cols].to_numpy(dtype=np.float64) if z_cols else np.zeros((n, 0))
    data = MatrixDataset(X=X, E=subj["E"].to_numpy(dtype=np.float64), Z=Z,
                         Y=subj["Y"].to_numpy(dtype=np.float64))
    return data, subject_ids


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_dataset(data: MatrixDataset, matrix_csv_path, subjects_csv_path,
                   subject_ids=None):
    """Write the dataset in the documented long CSV formats."""
    n, p, q = data.X.shape
    ids = list(subject_ids) if subject_ids is not None else list(range(n))
    with open(matrix_csv_path, "w") as fh:
        fh.write(",".join(MATRIX_COLUMNS) + "\n")
        for i, sid in enumerate(ids):
            for r in range(p):
                for c in range(q):
                    fh.write(f"{sid},{r},{c},{_fmt(data.X[i, r, c])}\n")
    z_cols = [f"Z{k + 1}" for k in range(data.K)]
    with open(subjects_csv_path, "w") as fh:
        fh.write(",".join(["subject_id", "E", "Y"] + z_cols) + "\n")
        for i, sid in enumerate(ids):
            row = [str(sid), _fmt(data.E[i]), str(int(data.Y[i]))]
            row += [_fmt(z) for z in data.Z[i]]
            fh.write(",".join(row) + "\n")


def preprocess(data: MatrixDataset, mode: str = "center") -> MatrixDataset:
    """Center, or center and scale by the element-wise population SD.

    Zero-variance cells are left centered (scale 1) with a warning.
    """
    if mode not in ("center", "center+scale"):
        raise DataFormatError(f"mode must be 'center' or 'center+scale', got {mode!r}")
    Xbar = data.X.mean(axis=0)
    X = data.X - Xbar
    if mode == "center+scale":
        if data.n < 2:
            raise DataFormatError("scaling needs at least 2 subjects")
        sd = np.sqrt(np.mean(X * X, axis=0))
        zero = sd == 0.0
        if zero.any():
            warnings.warn(f"{int(zero.sum())} zero-variance cells left unscaled")
            sd = np.where(zero, 1.0, sd)
        X = X / sd
    return MatrixDataset(X=X, E=data.E, Z=data.Z, Y=data.Y)
