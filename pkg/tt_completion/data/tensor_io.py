"""
File formats read and written by the CLI.

- Dense tensor file: header `K d_1 ... d_K`, then one value per line in row-major order.
- TT checkpoint: header `K`, then per core a line `I_k R_{k-1} R_k` followed by its values.
- Observation CSV: header `i_1,...,i_K,y` with 0-based indices.
- Time-series CSV: one numeric column, header optional.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..errors import ParseError, ShapeError
from ..tensor.observation import ObservationSet
from ..tensor.tt_core import TTTensor, element_count, ensure_dense_fits, validate_shape

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _format(value: float) -> str:
    return "%.17g" % value


def _parse_ints(text: str, path, line: int, count: Optional[int] = None) -> List[int]:
    parts = text.split()
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"expected integers, got {text.strip()!r}", line=line, path=path)
    if count is not None and len(values) != count:
        raise ParseError(f"expected {count} integers, got {len(values)}", line=line, path=path)
    return values


def _read_values(lines: List[str], start: int, count: int, path) -> np.ndarray:
    if len(lines) - start < count:
        raise ParseError(
            f"expected {count} values, file ends after {len(lines) - start}",
            line=len(lines),
            path=path,
        )
    values = np.empty(count)
    for offset in range(count):
        text = lines[start + offset].strip()
        try:
            values[offset] = float(text)
        except ValueError:
            raise ParseError(f"not a number: {text!r}", line=start + offset + 1, path=path)
    return values


def write_dense_tensor(path: PathLike, x: np.ndarray) -> Path:
    path = Path(path)
    x = np.asarray(x, dtype=np.float64)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(" ".join(str(v) for v in (x.ndim,) + x.shape) + "\n")
        for value in x.reshape(-1):
            f.write(_format(value) + "\n")
    logger.info(f"Wrote dense tensor {x.shape} to {path}")
    return path


def read_dense_tensor(path: PathLike) -> np.ndarray:
    path = Path(path)
    lines = [line for line in path.read_text().splitlines()]
    if not lines:
        raise ParseError("empty tensor file", line=1, path=path)
    header = _parse_ints(lines[0], path, 1)
    if not header or header[0] != len(header) - 1:
        raise ParseError("header must be `K d_1 ... d_K`", line=1, path=path)
    try:
        shape = validate_shape(header[1:])
    except ShapeError as e:
        raise ParseError(str(e), line=1, path=path)
    count = element_count(shape)
    ensure_dense_fits(count, f"dense tensor file {path}")
    values = _read_values(lines, 1, count, path)
    if any(line.strip() for line in lines[1 + count:]):
        raise ParseError("trailing data after the last value", line=2 + count, path=path)
    return values.reshape(shape)


def write_tt(path: PathLike, tt: TTTensor) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(f"{tt.order}\n")
        for core in tt.cores:
            f.write(" ".join(str(v) for v in core.shape) + "\n")
            for value in core.reshape(-1):
                f.write(_format(value) + "\n")
    logger.info(f"Wrote TT checkpoint {tt} to {path}")
    return path


def read_tt(path: PathLike) -> TTTensor:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ParseError("empty checkpoint", line=1, path=path)
    (order,) = _parse_ints(lines[0], path, 1, count=1)
    cursor = 1
    cores = []
    for _ in range(order):
        if cursor >= len(lines):
            raise ParseError(f"expected {order} cores, found {len(cores)}", line=cursor + 1, path=path)
        core_shape = _parse_ints(lines[cursor], path, cursor + 1, count=3)
        count = int(np.prod(core_shape))
        cores.append(_read_values(lines, cursor + 1, count, path).reshape(core_shape))
        cursor += 1 + count
    try:
        return TTTensor(tuple(cores))
    except ShapeError as e:
        raise ParseError(f"inconsistent cores: {e}", path=path)


def read_observations(path: PathLike, shape: Optional[Sequence[int]] = None) -> ObservationSet:
    """
    Load an observation CSV.

    Without an explicit shape, each mode size is taken as 1 + the largest index seen.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError("observation file is empty", line=1, path=path)
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed CSV: {e}", path=path)

    columns = [c.strip() for c in df.columns]
    if len(columns) < 3 or columns[-1] != "y" or columns[:-1] != [f"i_{j}" for j in range(1, len(columns))]:
        raise ParseError("header must be i_1,...,i_K,y with K >= 2", line=1, path=path)
    if df.empty:
        raise ParseError("observation file has no rows", line=2, path=path)

    order = len(columns) - 1
    indices = np.empty((len(df), order), dtype=np.int64)
    values = np.empty(len(df))
    for row, record in enumerate(df.itertuples(index=False)):
        line = row + 2
        try:
            indices[row] = [int(v) for v in record[:order]]
            values[row] = float(record[order])
        except ValueError:
            raise ParseError(f"malformed row {','.join(record)!r}", line=line, path=path)
        if np.any(indices[row] < 0):
            raise ParseError("indices must be non-negative", line=line, path=path)

    dims = tuple(shape) if shape is not None else tuple(int(m) + 1 for m in indices.max(axis=0))
    if len(dims) != order:
        raise ParseError(f"shape has {len(dims)} modes, file has {order}", line=1, path=path)
    logger.info(f"Loaded {len(df)} observations of a {dims} tensor from {path}")
    return ObservationSet(shape=dims, indices=indices, values=values)


def write_observations(path: PathLike, obs: ObservationSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(obs.indices, columns=[f"i_{j}" for j in range(1, len(obs.shape) + 1)])
    df["y"] = obs.values
    df.to_csv(path, index=False, float_format="%.17g")
    return path


def read_series(path: PathLike) -> np.ndarray:
    """First column of a CSV as floats; a non-numeric first line is treated as a header."""
    path = Path(path)
    try:
        df = pd.read_csv(path, header=None, usecols=[0], skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise ParseError("series file is empty", line=1, path=path)
    column = pd.to_numeric(df.iloc[:, 0], errors="coerce")
    if len(column) and np.isnan(column.iloc[0]):
        column = column.iloc[1:]
    bad = np.flatnonzero(column.isna().to_numpy())
    if bad.size:
        raise ParseError("non-numeric value in series", line=int(column.index[bad[0]]) + 1, path=path)
    if column.empty:
        raise ParseError("series has no values", line=1, path=path)
    return column.to_numpy(dtype=np.float64)


def write_table(path: PathLike, df: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def write_report(path: PathLike, report: Union[BaseModel, dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(report, BaseModel):
        path.write_text(report.model_dump_json(indent=2))
    else:
        path.write_text(json.dumps(report, indent=2, default=str))
    return path
