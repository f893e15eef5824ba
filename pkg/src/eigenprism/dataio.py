"""Delimited-text input for the CLI: matrices, vectors, datasets.

Files hold one observation per row, comma- or tab-separated (plain whitespace
also works), with an optional header line.  The response can live in its own
single-column file or be named as a column of the design file.
"""

import numpy as np

from .core_model import Dataset
from .errors import DimensionMismatch


def load_table(path) -> tuple[np.ndarray, list[str] | None]:
    """Parse a delimited file into a 2-D array plus the header, if present."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise DimensionMismatch(f"{path}: file is empty")
    first = lines[0]
    if "\t" in first:
        split = lambda s: s.split("\t")
    elif "," in first:
        split = lambda s: s.split(",")
    else:
        split = str.split

    header = None
    fields = [f.strip() for f in split(first)]
    try:
        [float(f) for f in fields]
    except ValueError:
        header = fields
        lines = lines[1:]
        if not lines:
            raise DimensionMismatch(f"{path}: header but no data rows")

    rows = []
    width = None
    for k, line in enumerate(lines):
        values = [f.strip() for f in split(line)]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DimensionMismatch(
                f"{path}: row {k + 1} has {len(values)} fields, expected {width}"
            )
        try:
            rows.append([float(v) for v in values])
        except ValueError as exc:
            raise DimensionMismatch(f"{path}: row {k + 1}: {exc}") from None
    return np.array(rows, dtype=float), header


def load_matrix(path) -> np.ndarray:
    return load_table(path)[0]


def load_vector(path) -> np.ndarray:
    """Load a vector stored as a single column (or a single row)."""
    data, _ = load_table(path)
    if 1 not in data.shape:
        raise DimensionMismatch(f"{path}: expected a single column, got {data.shape}")
    return data.ravel()


def load_index_set(path) -> np.ndarray:
    """Load 0-based integer indices, one per row."""
    values = load_vector(path)
    idx = values.astype(int)
    if np.any(idx != values):
        raise DimensionMismatch(f"{path}: indices must be integers")
    return idx


def load_dataset(design_path, response_path=None, response_col=None) -> Dataset:
    """Assemble a Dataset from a design file plus a response source.

    Exactly one of ``response_path`` (single-column file) and ``response_col``
    (column name inside the design file, which is then removed from X) must be
    given.
    """
    if (response_path is None) == (response_col is None):
        raise DimensionMismatch("provide exactly one of response file / response column")
    table, header = load_table(design_path)
    if response_col is not None:
        if header is None or response_col not in header:
            raise DimensionMismatch(
                f"{design_path}: no column named {response_col!r} in header"
            )
        j = header.index(response_col)
        y = table[:, j]
        x = np.delete(table, j, axis=1)
        return Dataset(x, y)
    return Dataset(table, load_vector(response_path))
