import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from backend.models.graph import DagGraph
from backend.models.multi_logit import Dataset, VariableSpec
from backend.utils.exceptions import (LevelOutOfRange, NodeOutOfRange, ParseError,
                                      StructureLearningError)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str):
    """Write through a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class EdgeListProcessor:
    """
    Plain-text edge lists: a first line ``p <count>`` followed by one
    ``j i`` line per edge j -> i, 0-based.
    """

    @staticmethod
    def parse(text: str, source: Optional[str] = None) -> DagGraph:
        p = None
        edges = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if p is None:
                if len(fields) != 2 or fields[0] != 'p':
                    raise ParseError(line_no, f"expected header 'p <count>', got {raw!r}", source)
                p = EdgeListProcessor._to_int(fields[1], line_no, source)
                if p < 1:
                    raise ParseError(line_no, f"node count must be >= 1, got {p}", source)
                continue
            if len(fields) != 2:
                raise ParseError(line_no, f"expected 'j i', got {raw!r}", source)
            j, i = (EdgeListProcessor._to_int(f, line_no, source) for f in fields)
            for node in (j, i):
                if not 0 <= node < p:
                    raise NodeOutOfRange(f"{source or 'line'} {line_no}: node {node} outside 0..{p - 1}")
            if j == i:
                raise ParseError(line_no, f"self-loop on node {j}", source)
            edges.append((j, i))
        if p is None:
            raise ParseError(None, "missing 'p <count>' header", source)
        return DagGraph.from_edges(p, edges)

    @staticmethod
    def _to_int(token: str, line_no: int, source: Optional[str]) -> int:
        try:
            return int(token)
        except ValueError:
            raise ParseError(line_no, f"{token!r} is not an integer", source) from None

    @staticmethod
    def format(g: DagGraph) -> str:
        lines = [f"p {g.p}"] + [f"{j} {i}" for j, i in g.edges()]
        return "\n".join(lines) + "\n"


def read_edge_list(path: PathLike) -> DagGraph:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(None, f"cannot read edge list: {e}", str(path)) from e
    return EdgeListProcessor.parse(text, source=str(path))


def write_edge_list(g: DagGraph, path: PathLike):
    atomic_write_text(path, EdgeListProcessor.format(g))


class DatasetFileProcessor:
    """Dataset CSV files (header x0,x1,... then integer levels) and spec sidecars."""

    @staticmethod
    def load_from_file(file_path: PathLike, spec_path: Optional[PathLike] = None) -> Dataset:
        try:
            df = pd.read_csv(file_path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ParseError(None, f"Error loading file: {e}", str(file_path)) from e
        expected = [f"x{k}" for k in range(df.shape[1])]
        if [str(c).strip() for c in df.columns] != expected:
            raise ParseError(1, f"header must be {','.join(expected)}, got {','.join(map(str, df.columns))}",
                             str(file_path))
        if df.isna().any().any():
            h = int(np.flatnonzero(df.isna().any(axis=1).to_numpy())[0])
            raise ParseError(h + 2, "missing value", str(file_path))
        numeric = df.apply(lambda col: pd.to_numeric(col, errors='coerce'))
        bad = numeric.isna() | (numeric % 1 != 0)
        if bad.any().any():
            h = int(np.flatnonzero(bad.any(axis=1).to_numpy())[0])
            raise ParseError(h + 2, "non-integer level", str(file_path))
        specs = DatasetFileProcessor.load_spec(spec_path) if spec_path else None
        try:
            return Dataset.from_frame(numeric.astype(np.int64), specs)
        except LevelOutOfRange as e:
            raise LevelOutOfRange(f"{file_path}: {e}") from e

    @staticmethod
    def save_to_file(d: Dataset, file_path: PathLike):
        atomic_write_text(file_path, d.to_frame().to_csv(index=False))

    @staticmethod
    def load_spec(spec_path: PathLike) -> VariableSpec:
        try:
            payload = json.loads(Path(spec_path).read_text())
            return VariableSpec(tuple(payload['cardinalities']))
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise ParseError(None, f"invalid spec sidecar: {e}", str(spec_path)) from e

    @staticmethod
    def save_spec(specs: VariableSpec, spec_path: PathLike):
        atomic_write_text(spec_path, json.dumps({'cardinalities': list(specs.cardinalities)}, indent=2) + "\n")


class RunArtifactManager:
    """Lays out one run directory: config, tables, traces, datasets and edge lists."""

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir)

    def path(self, *parts: str) -> Path:
        return self.out_dir.joinpath(*parts)

    def write_json(self, name: str, payload) -> Path:
        target = self.path(name)
        atomic_write_text(target, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return target

    def write_table(self, name: str, df: pd.DataFrame) -> Path:
        target = self.path(name)
        atomic_write_text(target, df.to_csv(index=False, float_format='%.6g'))
        return target

    def write_replicate(self, setting: str, replicate: int, truth: DagGraph, data: Dataset,
                        estimated: DagGraph, trace: Optional[pd.DataFrame] = None, method: str = 'svrcd'):
        folder = Path('replicates') / setting / f"r{replicate:03d}"
        try:
            write_edge_list(truth, self.path(str(folder), 'truth.edges'))
            DatasetFileProcessor.save_to_file(data, self.path(str(folder), 'data.csv'))
            DatasetFileProcessor.save_spec(data.specs, self.path(str(folder), 'data.spec.json'))
            write_edge_list(estimated, self.path(str(folder), f'{method}.edges'))
            if trace is not None:
                self.write_table(str(folder / f'{method}_trace.csv'), trace)
        except OSError as e:
            raise StructureLearningError(f"cannot write replicate files under {self.path(str(folder))}: {e}") from e
