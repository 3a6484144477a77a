"""Feature-vector datasets, labeled-pool state, synthetic domain generation.

On-disk format: a manifest JSON with exactly the fields ``name``,
``domain_tag``, ``dim``, ``classes``, ``train_csv``, ``test_csv`` (CSV paths
relative to the manifest), and CSV files with header ``id,label,f0,...,f{d-1}``
where ``label`` is a class name from the manifest. UTF-8, '.' decimal
separator, no thousands separators.

Ground-truth labels live on :class:`Sample` as ``oracle_label`` but are only
consulted by the labeling oracle (:func:`acquire_labels`, stratified
seeding), evaluation, and the synthetic generator; learners see labels only
for ids that were purchased into a :class:`LabeledState`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from shiftlab.errors import (
    AlreadyLabeled,
    DataError,
    DimensionMismatch,
    DuplicateId,
    InvalidSpec,
    MissingFile,
    UnknownId,
    UnknownLabel,
)
from shiftlab.streams import derive_stream

_MANIFEST_FIELDS = ("name", "domain_tag", "dim", "classes", "train_csv", "test_csv")


@dataclass(frozen=True, eq=False)
class Sample:
    """One feature vector with its ground-truth class index."""

    id: str
    features: np.ndarray
    oracle_label: int


@dataclass(frozen=True, eq=False)
class DatasetHandle:
    """A named, domain-tagged feature dataset with train-pool and test splits.

    Immutable after construction; ``meta`` carries generator-side extras
    (e.g. transformed base cluster means for synthetic domains) and is never
    serialized.
    """

    name: str
    domain_tag: str
    dim: int
    class_names: tuple[str, ...]
    train_pool: tuple[Sample, ...]
    test_set: tuple[Sample, ...]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for split, samples in (("train", self.train_pool), ("test", self.test_set)):
            for sample in samples:
                if sample.features.shape != (self.dim,):
                    raise DimensionMismatch(
                        f"{self.name}/{split} sample {sample.id!r} has "
                        f"{sample.features.shape[0] if sample.features.ndim == 1 else '?'} "
                        f"features, expected {self.dim}"
                    )
                if not np.all(np.isfinite(sample.features)):
                    raise DataError(f"{self.name}/{split} sample {sample.id!r} has non-finite features")
                if not 0 <= sample.oracle_label < len(self.class_names):
                    raise UnknownLabel(
                        f"{self.name}/{split} sample {sample.id!r} label "
                        f"{sample.oracle_label} outside [0, {len(self.class_names)})"
                    )
                if sample.id in seen:
                    raise DuplicateId(f"{self.name}: duplicate sample id {sample.id!r}")
                seen.add(sample.id)

    def train_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.train_pool)

    def sample_by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.train_pool}


def feature_matrix(samples: Sequence[Sample]) -> np.ndarray:
    """Stack sample features into an (n, d) float64 matrix."""
    if not samples:
        return np.zeros((0, 0))
    return np.stack([s.features for s in samples]).astype(np.float64)


def oracle_labels(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.oracle_label for s in samples], dtype=np.int64)


# --- labeled-pool state -----------------------------------------------------


@dataclass(frozen=True)
class LabeledState:
    """Which pool sample ids have been labeled, and the per-class counts.

    ``labeled_ids`` is kept in sorted order so that merging disjoint batches
    commutes; updates are functional (a new state is returned).
    """

    labeled_ids: tuple[str, ...]
    per_class_counts: dict[int, int]

    @classmethod
    def empty(cls) -> "LabeledState":
        return cls((), {})

    @property
    def labeled_count(self) -> int:
        return len(self.labeled_ids)

    def count_for(self, class_index: int) -> int:
        return self.per_class_counts.get(class_index, 0)


def acquire_labels(state: LabeledState, ids: Sequence[str], pool: DatasetHandle) -> LabeledState:
    """Purchase labels for ``ids`` from the oracle; returns the new state."""
    by_id = pool.sample_by_id()
    already = set(state.labeled_ids)
    counts = dict(state.per_class_counts)
    for sample_id in ids:
        sample = by_id.get(sample_id)
        if sample is None:
            raise UnknownId(f"sample id {sample_id!r} is not in the train pool")
        if sample_id in already:
            raise AlreadyLabeled(f"sample id {sample_id!r} is already labeled")
        already.add(sample_id)
        counts[sample.oracle_label] = counts.get(sample.oracle_label, 0) + 1
    return LabeledState(tuple(sorted(already)), counts)


# --- loading and writing ------------------------------------------------------


def _read_feature_csv(path: Path, dim: int, class_names: tuple[str, ...]) -> list[Sample]:
    if not path.is_file():
        raise MissingFile(f"feature file {path} does not exist")
    index_of = {name: i for i, name in enumerate(class_names)}
    expected_header = ["id", "label"] + [f"f{i}" for i in range(dim)]
    samples = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != expected_header:
            raise DimensionMismatch(f"{path}: header does not match id,label,f0..f{dim - 1}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != dim + 2:
                raise DimensionMismatch(f"{path}:{row_no}: expected {dim + 2} columns, got {len(row)}")
            sample_id, label = row[0], row[1]
            if label not in index_of:
                raise UnknownLabel(f"{path}:{row_no}: label {label!r} is not a declared class")
            try:
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{row_no}: bad float value ({exc})") from exc
            values.setflags(write=False)
            samples.append(Sample(sample_id, values, index_of[label]))
    return samples


def load_feature_dataset(manifest_path: str | Path) -> DatasetHandle:
    """Load a dataset from its manifest; sample order follows the files."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest {manifest_path} does not exist")
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or sorted(raw) != sorted(_MANIFEST_FIELDS):
        raise DataError(f"manifest {manifest_path} must have exactly the fields {_MANIFEST_FIELDS}")
    dim = raw["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise DataError(f"manifest {manifest_path}: dim must be a positive integer")
    classes = raw["classes"]
    if (
        not isinstance(classes, list)
        or not classes
        or any(not isinstance(c, str) or not c for c in classes)
        or len(set(classes)) != len(classes)
    ):
        raise DataError(f"manifest {manifest_path}: classes must be distinct non-empty strings")
    class_names = tuple(classes)
    base = manifest_path.parent
    train = _read_feature_csv(base / raw["train_csv"], dim, class_names)
    test = _read_feature_csv(base / raw["test_csv"], dim, class_names)
    return DatasetHandle(
        name=str(raw["name"]),
        domain_tag=str(raw["domain_tag"]),
        dim=dim,
        class_names=class_names,
        train_pool=tuple(train),
        test_set=tuple(test),
    )


def load_registry(directory: str | Path) -> dict[str, DatasetHandle]:
    """Load every ``*.manifest.json`` under ``directory`` into a registry."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFile(f"dataset directory {directory} does not exist")
    registry: dict[str, DatasetHandle] = {}
    for manifest in sorted(directory.glob("*.manifest.json")):
        handle = load_feature_dataset(manifest)
        if handle.name in registry:
            raise DuplicateId(f"dataset name {handle.name!r} appears in more than one manifest")
        registry[handle.name] = handle
    return registry


def _write_feature_csv(path: Path, samples: Sequence[Sample], class_names: tuple[str, ...], dim: int) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(dim)])
        for sample in samples:
            row = [sample.id, class_names[sample.oracle_label]]
            row.extend(repr(float(v)) for v in sample.features)
            writer.writerow(row)


def write_dataset(handle: DatasetHandle, directory: str | Path) -> Path:
    """Write manifest + train/test CSVs for ``handle``; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    train_csv = f"{handle.name}.train.csv"
    test_csv = f"{handle.name}.test.csv"
    _write_feature_csv(directory / train_csv, handle.train_pool, handle.class_names, handle.dim)
    _write_feature_csv(directory / test_csv, handle.test_set, handle.class_names, handle.dim)
    manifest = {
        "name": handle.name,
        "domain_tag": handle.domain_tag,
        "dim": handle.dim,
        "classes": list(handle.class_names),
        "train_csv": train_csv,
        "test_csv": test_csv,
    }
    manifest_path = directory / f"{handle.name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


# --- synthetic domains ----------------------------------------------------------


@dataclass(frozen=True)
class DomainShift:
    """Affine shift for one synthetic domain.

    ``rotation_angles`` are radians applied in successive random 2-planes
    drawn once per spec; ``translation`` is a full d-vector; ``noise_scale``
    scales an extra isotropic Gaussian shared across domains so equal
    transforms yield identical features.
    """

    tag: str
    rotation_angles: tuple[float, ...] = ()
    translation: tuple[float, ...] = ()
    noise_scale: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a family of domain-shifted Gaussian-cluster datasets."""

    classes: int
    dim: int
    per_class_train: int
    per_class_test: int
    domains: tuple[DomainShift, ...]
    class_separation: float = 4.0
    seed: int = 0
    name_prefix: str = "synth"

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise InvalidSpec(f"classes must be >= 2, got {self.classes}")
        if self.dim < 2:
            raise InvalidSpec(f"dim must be >= 2, got {self.dim}")
        if self.per_class_train < 1 or self.per_class_test < 1:
            raise InvalidSpec("per_class_train and per_class_test must be >= 1")
        if self.class_separation <= 0:
            raise InvalidSpec("class_separation must be positive")
        if not self.domains:
            raise InvalidSpec("at least one domain transform is required")
        tags = [d.tag for d in self.domains]
        if len(set(tags)) != len(tags):
            raise InvalidSpec("domain tags must be distinct")
        planes = max((len(d.rotation_angles) for d in self.domains), default=0)
        if 2 * planes > self.dim:
            raise InvalidSpec(f"{planes} rotation planes need dim >= {2 * planes}")
        for d in self.domains:
            if d.translation and len(d.translation) != self.dim:
                raise InvalidSpec(f"domain {d.tag!r}: translation must have length {self.dim}")
            if d.noise_scale < 0:
                raise InvalidSpec(f"domain {d.tag!r}: noise_scale must be >= 0")


def _rotate(points: np.ndarray, planes: list[tuple[np.ndarray, np.ndarray]], angles: tuple[float, ...]) -> np.ndarray:
    out = points.astype(np.float64, copy=True)
    for (u, v), angle in zip(planes, angles):
        cu = out @ u
        cv = out @ v
        c, s = math.cos(angle), math.sin(angle)
        out += (c - 1.0) * (np.outer(cu, u) + np.outer(cv, v))
        out += s * (np.outer(cu, v) - np.outer(cv, u))
    return out


def generate_synthetic_domains(spec: SynthSpec) -> list[DatasetHandle]:
    """Generate one dataset per domain from shared base clusters.

    All domains transform the same base draws, and the extra per-domain
    noise reuses one shared standard-normal draw scaled by each domain's
    ``noise_scale`` — so identical transforms produce identical features.
    Deterministic given ``spec.seed``.
    """
    C, d = spec.classes, spec.dim
    m, q = spec.per_class_train, spec.per_class_test
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    raw_means = rng.standard_normal((C, d))
    n_planes = max(len(dom.rotation_angles) for dom in spec.domains)
    planes: list[tuple[np.ndarray, np.ndarray]] = []
    if n_planes:
        basis, _ = np.linalg.qr(rng.standard_normal((d, 2 * n_planes)))
        planes = [(basis[:, 2 * j], basis[:, 2 * j + 1]) for j in range(n_planes)]
    base_train = rng.standard_normal((C, m, d))
    base_test = rng.standard_normal((C, q, d))
    eta_train = rng.standard_normal((C, m, d))
    eta_test = rng.standard_normal((C, q, d))

    gaps = [
        float(np.linalg.norm(raw_means[i] - raw_means[j]))
        for i in range(C)
        for j in range(i + 1, C)
    ]
    means = raw_means * (spec.class_separation / min(gaps))

    train_points = np.concatenate([means[c] + base_train[c] for c in range(C)])
    test_points = np.concatenate([means[c] + base_test[c] for c in range(C)])
    train_eta = np.concatenate(list(eta_train))
    test_eta = np.concatenate(list(eta_test))
    train_labels = np.repeat(np.arange(C), m)
    test_labels = np.repeat(np.arange(C), q)
    class_names = tuple(f"class{c}" for c in range(C))

    handles = []
    for dom in spec.domains:
        shift = np.array(dom.translation, dtype=np.float64) if dom.translation else np.zeros(d)

        def transform(points: np.ndarray) -> np.ndarray:
            return _rotate(points, planes, dom.rotation_angles) + shift

        clean_train = transform(train_points)
        clean_test = transform(test_points)
        x_train = clean_train + dom.noise_scale * train_eta
        x_test = clean_test + dom.noise_scale * test_eta
        base_class_means = np.stack(
            [clean_train[train_labels == c].mean(axis=0) for c in range(C)]
        )

        def build(ids_prefix: str, X: np.ndarray, y: np.ndarray) -> tuple[Sample, ...]:
            samples = []
            for i in range(X.shape[0]):
                row = X[i].copy()
                row.setflags(write=False)
                samples.append(Sample(f"{ids_prefix}-{i:05d}", row, int(y[i])))
            return tuple(samples)

        handles.append(
            DatasetHandle(
                name=f"{spec.name_prefix}-{dom.tag}",
                domain_tag=dom.tag,
                dim=d,
                class_names=class_names,
                train_pool=build("tr", x_train, train_labels),
                test_set=build("te", x_test, test_labels),
                meta={
                    "base_class_means": base_class_means,
                    "true_class_means": transform(means),
                    "noise_scale": dom.noise_scale,
                },
            )
        )
    return handles


def translation_direction(seed: int, dim: int) -> np.ndarray:
    """Fixed unit vector used to turn scalar shift magnitudes into vectors."""
    v = derive_stream(seed, ("synth", "shift-direction")).standard_normal(dim)
    return v / np.linalg.norm(v)
