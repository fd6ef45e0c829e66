"""Dataset loading, writing, synthetic generation, and splitting."""

import numpy as np
import scipy.sparse as sp

from .erm import Dataset

__all__ = ["load_dataset", "load_libsvm", "load_csv", "save_libsvm",
           "gen_synthetic_regression", "gen_synthetic_classification",
           "train_test_split"]


class DataFormatError(ValueError):
    """A data file failed to parse."""


def load_dataset(path, fmt="libsvm", task=None, n_features=None):
    """Load a dataset from ``path`` in the given format ("libsvm" or "csv")."""
    if fmt == "libsvm":
        return load_libsvm(path, task=task, n_features=n_features)
    if fmt == "csv":
        return load_csv(path, task=task)
    raise ValueError(f"unknown dataset format {fmt!r}")


def _infer_task(labels, task):
    if task is not None:
        return task
    vals = np.unique(labels)
    if vals.size <= 2 and np.all(np.isin(vals, (-1.0, 1.0))):
        return "classification"
    return "regression"


def load_libsvm(path, task=None, n_features=None):
    """Parse the plain-text sparse format ``label idx:val idx:val ...``.

    Indices are 1-based in the file and mapped to 0-based columns.  Malformed
    lines are reported with their line number; an empty file is an error.
    """
    labels = []
    rows, cols, vals = [], [], []
    max_col = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: bad label {parts[0]!r}")
            for tok in parts[1:]:
                try:
                    idx, val = tok.split(":", 1)
                    col = int(idx) - 1
                    if col < 0:
                        raise ValueError
                    rows.append(len(labels) - 1)
                    cols.append(col)
                    vals.append(float(val))
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}: bad feature token {tok!r}")
                max_col = max(max_col, cols[-1])
    if not labels:
        raise DataFormatError(f"{path}: no samples")
    p = max_col + 1 if n_features is None else int(n_features)
    if max_col >= p:
        raise DataFormatError(
            f"{path}: feature index {max_col + 1} exceeds n_features={p}")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), p))
    b = np.asarray(labels)
    return Dataset(A, b, _infer_task(b, task))


def save_libsvm(dataset, path):
    """Write a dataset in libsvm text format (1-based indices, %.17g values)."""
    A = dataset.A.tocsr() if dataset.is_sparse else dataset.A
    with open(path, "w") as fh:
        for i in range(dataset.n):
            if dataset.is_sparse:
                start, stop = A.indptr[i], A.indptr[i + 1]
                pairs = zip(A.indices[start:stop], A.data[start:stop])
            else:
                row = A[i]
                pairs = ((j, row[j]) for j in np.flatnonzero(row))
            toks = [format(dataset.b[i], ".17g")]
            toks.extend(f"{j + 1}:{format(v, '.17g')}" for j, v in pairs)
            fh.write(" ".join(toks) + "\n")


def load_csv(path, task=None):
    """Load a dense dataset from CSV; the last column is the label.

    A single non-numeric first row is treated as a header and skipped.
    """
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: no samples")
    start = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-numeric value")
        if len(rows[-1]) != len(rows[0]):
            raise DataFormatError(
                f"{path}:{lineno}: expected {len(rows[0])} columns, "
                f"got {len(rows[-1])}")
    if len(rows[0]) < 2:
        raise DataFormatError(f"{path}: need at least one feature column")
    M = np.asarray(rows)
    return Dataset(M[:, :-1], M[:, -1], _infer_task(M[:, -1], task))


def gen_synthetic_regression(n=100, p=10, sparsity=3, sigma=0.01, seed=0):
    """Linear data b = A x + noise with a sparse ground truth.

    A is uniform on [-1, 1]; the ground truth has ``sparsity`` nonzero
    coefficients drawn uniformly from [-1, 1]; the noise is Gaussian with
    standard deviation ``sigma``.  Returns ``(Dataset, ground_truth)``.
    """
    if sparsity > p:
        raise ValueError("sparsity cannot exceed p")
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(n, p))
    x_true = np.zeros(p)
    support = rng.choice(p, size=sparsity, replace=False)
    x_true[support] = rng.uniform(-1.0, 1.0, size=sparsity)
    b = A @ x_true
    if sigma > 0:
        b = b + rng.normal(0.0, sigma, size=n)
    return Dataset(A, b, "regression"), x_true


def gen_synthetic_classification(n=100, p=10, sparsity=3, sigma=0.01, seed=0):
    """Binary labels sign(A x + noise) over the same design as the regression
    generator.  Returns ``(Dataset, ground_truth)``."""
    ds, x_true = gen_synthetic_regression(n, p, sparsity, sigma, seed)
    b = np.where(ds.b >= 0, 1.0, -1.0)
    return Dataset(ds.A, b, "classification"), x_true


def train_test_split(dataset, test_fraction=0.2, seed=0):
    """Deterministic shuffled split into (train, test) datasets."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    n_test = max(1, int(round(dataset.n * test_fraction)))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)
