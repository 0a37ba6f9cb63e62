from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..datamodel import Stage
from ..errors import ForestError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with per-row labels and row identifiers (IP strings).

    One-hot columns are expected to be expanded already; ``schema`` names
    the columns in order.
    """

    schema: tuple[str, ...]
    rows: np.ndarray
    labels: tuple[str, ...]
    ids: tuple[str, ...]
    stage: Optional[str] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(self.schema))
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise ForestError(f"row width {rows.shape[-1] if rows.ndim else 0} does not match schema length {len(self.schema)}")
        if len(self.labels) != rows.shape[0] or len(self.ids) != rows.shape[0]:
            raise ForestError("labels/ids must have one entry per row")
        if self.stage is not None:
            allowed = set(Stage(self.stage).labels)
            stray = set(self.labels) - allowed
            if stray:
                raise ForestError(f"labels {sorted(stray)} are outside the {self.stage} label space")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "ids", tuple(self.ids))

    @classmethod
    def from_rows(cls, schema: Sequence[str], rows, labels: Sequence[str], ids: Sequence[str] | None = None, stage=None):
        rows = np.asarray(rows, dtype=np.float64)
        if ids is None:
            ids = [str(i) for i in range(len(labels))]
        return cls(tuple(schema), rows, tuple(labels), tuple(ids), stage)

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def label_space(self) -> tuple[str, ...]:
        """Labels in lexicographic order; this order fixes class indices."""
        if self.stage is not None:
            return tuple(sorted(Stage(self.stage).labels))
        return tuple(sorted(set(self.labels)))

    def encoded_labels(self, space: Sequence[str] | None = None) -> np.ndarray:
        space = tuple(space) if space is not None else self.label_space
        index = {lab: i for i, lab in enumerate(space)}
        return np.array([index[lab] for lab in self.labels], dtype=np.int64)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.schema,
            self.rows[idx],
            tuple(self.labels[i] for i in idx),
            tuple(self.ids[i] for i in idx),
            self.stage,
        )
