"""Instances, datasets and CSV ingestion.

Dataset CSV layout: header ``id,domain,label,<feature columns...>``; the
label cell may be empty for unlabeled rows. Feature cells must be numeric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataParseError, DuplicateId, SchemaMismatch


@dataclass(frozen=True)
class Instance:
    id: str
    domain: str
    label: str | None
    features: dict[str, float]

    def vector(self, schema: tuple[str, ...]) -> np.ndarray:
        try:
            return np.array([self.features[c] for c in schema], dtype=float)
        except KeyError as exc:
            raise SchemaMismatch(f"instance {self.id!r} lacks feature {exc.args[0]!r}") from exc


@dataclass
class Dataset:
    instances: list[Instance]
    schema: tuple[str, ...]
    _by_id: dict[str, Instance] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {}
        for inst in self.instances:
            if inst.id in self._by_id:
                raise DuplicateId(inst.id)
            if set(inst.features) != set(self.schema):
                raise SchemaMismatch(
                    f"instance {inst.id!r} features do not match schema {self.schema}"
                )
            self._by_id[inst.id] = inst

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def get(self, ident: str) -> Instance | None:
        return self._by_id.get(ident)

    @property
    def labels(self) -> list[str | None]:
        return [inst.label for inst in self.instances]

    @property
    def ids(self) -> list[str]:
        return [inst.id for inst in self.instances]

    def feature_matrix(self) -> np.ndarray:
        if not self.instances:
            return np.zeros((0, len(self.schema)))
        return np.stack([inst.vector(self.schema) for inst in self.instances])

    def class_labels(self) -> list[str]:
        """Distinct non-null labels, sorted."""
        return sorted({inst.label for inst in self.instances if inst.label is not None})

    def domains(self) -> list[str]:
        return sorted({inst.domain for inst in self.instances})

    def subset(self, instances: list[Instance]) -> "Dataset":
        return Dataset(instances=list(instances), schema=self.schema)

    def filter_domain(self, domain: str) -> "Dataset":
        return self.subset([i for i in self.instances if i.domain == domain])


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataParseError(1, "", "empty file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "domain" or header[2] != "label":
            raise DataParseError(1, ",".join(header[:3]), "header must start with id,domain,label")
        feature_cols = tuple(header[3:])
        instances: list[Instance] = []
        seen_rows: dict[str, int] = {}
        for row_num, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataParseError(row_num, "", f"expected {len(header)} cells, got {len(row)}")
            ident, domain, label = row[0], row[1], row[2] or None
            if ident in seen_rows:
                raise DuplicateId(f"{ident} (rows {seen_rows[ident]} and {row_num})")
            seen_rows[ident] = row_num
            features = {}
            for col, cell in zip(feature_cols, row[3:]):
                try:
                    features[col] = float(cell)
                except ValueError:
                    raise DataParseError(row_num, col, f"non-numeric feature cell {cell!r}") from None
            instances.append(Instance(id=ident, domain=domain, label=label, features=features))
    return Dataset(instances=instances, schema=feature_cols)


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "domain", "label"] + list(dataset.schema))
        for inst in dataset.instances:
            writer.writerow(
                [inst.id, inst.domain, inst.label or ""]
                + ["%.12g" % inst.features[c] for c in dataset.schema]
            )
