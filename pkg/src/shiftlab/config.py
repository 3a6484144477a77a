"""Task specifications, experiment configuration, overrides, plan validation.

Task files are strict UTF-8 JSON with exactly the fields ``name``,
``problem_type``, ``stages``, ``whitelist`` and ``results_file``; each stage
object has exactly ``name`` ("base" or "adapt"), ``dataset``,
``seed_budgets`` and ``label_budget``. Budgets are cumulative: seed budgets
count labels per class, label budgets count total labels across classes
(including the seeded ones).

Experiment parameters are overridable through dotted-path tokens such as
``algorithm_params.lambda=0.05`` or ``query_strategy=entropy``; list values
use comma separation (``algorithm_params.tau_grid=1,4,16``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields, replace
from typing import TYPE_CHECKING, Any, Mapping

from shiftlab.errors import (
    BudgetExceedsPool,
    EmptyWhitelist,
    HarnessError,
    MalformedInput,
    SchemaViolation,
    TypeMismatch,
    UnknownKey,
    UnknownTargetDataset,
    UnsupportedProblemType,
)

if TYPE_CHECKING:
    from shiftlab.data import DatasetHandle

PROBLEM_TYPES = ("image_classification", "object_detection", "video_classification")
STAGE_KINDS = ("base", "adapt")
ALGORITHMS = ("centroid", "mme", "consistency")
QUERY_STRATEGIES = ("random", "entropy", "margin")

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*\Z")

_TASK_FIELDS = ("name", "problem_type", "stages", "whitelist", "results_file")
_STAGE_FIELDS = ("name", "dataset", "seed_budgets", "label_budget")


@dataclass(frozen=True)
class StageSpec:
    """One protocol stage: a target dataset plus its cumulative budgets."""

    kind: str
    dataset: str
    seed_budgets: tuple[int, ...]
    label_budgets: tuple[int, ...]


@dataclass(frozen=True)
class TaskSpec:
    """A parsed task definition."""

    name: str
    problem_type: str
    stages: tuple[StageSpec, ...]
    whitelist: tuple[str, ...]
    results_file: str


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise SchemaViolation(message)


def _check_budget_list(raw: Any, where: str) -> tuple[int, ...]:
    _expect(isinstance(raw, list), f"{where} must be a list")
    values = []
    for item in raw:
        if isinstance(item, bool) or not isinstance(item, int):
            raise SchemaViolation(f"{where} entries must be integers, got {item!r}")
        _expect(item > 0, f"{where} entries must be positive, got {item}")
        values.append(item)
    for prev, nxt in zip(values, values[1:]):
        _expect(prev < nxt, f"{where} must be strictly increasing ({prev} >= {nxt})")
    return tuple(values)


def _check_str(raw: Any, where: str) -> str:
    _expect(isinstance(raw, str) and raw != "", f"{where} must be a non-empty string")
    return raw


def _parse_stage(raw: Any, index: int) -> StageSpec:
    where = f"stages[{index}]"
    _expect(isinstance(raw, dict), f"{where} must be an object")
    for key in raw:
        _expect(key in _STAGE_FIELDS, f"{where}: unknown field {key!r}")
    for key in _STAGE_FIELDS:
        _expect(key in raw, f"{where}: missing field {key!r}")
    kind = _check_str(raw["name"], f"{where}.name")
    _expect(kind in STAGE_KINDS, f"{where}.name must be one of {STAGE_KINDS}, got {kind!r}")
    expected = "base" if index == 0 else "adapt"
    _expect(kind == expected, f"{where}.name must be {expected!r} (got {kind!r})")
    seed = _check_budget_list(raw["seed_budgets"], f"{where}.seed_budgets")
    labels = _check_budget_list(raw["label_budget"], f"{where}.label_budget")
    _expect(seed or labels, f"{where}: seed_budgets and label_budget are both empty")
    return StageSpec(
        kind=kind,
        dataset=_check_str(raw["dataset"], f"{where}.dataset"),
        seed_budgets=seed,
        label_budgets=labels,
    )


def parse_task_spec(text: str) -> TaskSpec:
    """Parse task-file contents into a validated :class:`TaskSpec`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"task file is not valid JSON: {exc}") from exc
    _expect(isinstance(raw, dict), "task file must contain a JSON object")
    for key in raw:
        _expect(key in _TASK_FIELDS, f"unknown field {key!r}")
    for key in _TASK_FIELDS:
        _expect(key in raw, f"missing field {key!r}")

    name = _check_str(raw["name"], "name")
    problem_type = _check_str(raw["problem_type"], "problem_type")
    _expect(
        problem_type in PROBLEM_TYPES,
        f"problem_type must be one of {PROBLEM_TYPES}, got {problem_type!r}",
    )
    _expect(isinstance(raw["stages"], list) and raw["stages"], "stages must be a non-empty list")
    stages = tuple(_parse_stage(s, i) for i, s in enumerate(raw["stages"]))

    _expect(isinstance(raw["whitelist"], list), "whitelist must be a list")
    whitelist = tuple(_check_str(w, "whitelist entry") for w in raw["whitelist"])
    _expect(len(set(whitelist)) == len(whitelist), "whitelist names must be distinct")

    results_file = _check_str(raw["results_file"], "results_file")
    _expect(not results_file.startswith("/"), "results_file must be a relative path")
    return TaskSpec(name, problem_type, stages, whitelist, results_file)


def task_to_dict(spec: TaskSpec) -> dict:
    """Plain-JSON representation using the on-disk field names."""
    return {
        "name": spec.name,
        "problem_type": spec.problem_type,
        "stages": [
            {
                "name": s.kind,
                "dataset": s.dataset,
                "seed_budgets": list(s.seed_budgets),
                "label_budget": list(s.label_budgets),
            }
            for s in spec.stages
        ],
        "whitelist": list(spec.whitelist),
        "results_file": spec.results_file,
    }


def serialize_task_spec(spec: TaskSpec) -> str:
    """Inverse of :func:`parse_task_spec`; round-trips exactly."""
    return json.dumps(task_to_dict(spec), indent=2) + "\n"


# --- experiment configuration -------------------------------------------------


@dataclass(frozen=True)
class AlgorithmParams:
    """Hyperparameters shared across the pluggable learners.

    Override keys use the names documented below; ``lambda`` maps onto the
    ``lambda_`` attribute. ``embed_dim == 0`` means "use the feature dim".
    """

    lambda_: float = 0.1
    learning_rate: float = 0.01
    iterations: int = 200
    temperature: float = 0.05
    tau_grid: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
    episodes: int = 50
    mask_count: int = 3
    mask_fraction: float = 0.5
    rounds: int = 3
    embed_dim: int = 0

    def __post_init__(self) -> None:
        _expect(self.lambda_ >= 0, f"lambda must be >= 0, got {self.lambda_}")
        _expect(self.learning_rate > 0, f"learning_rate must be > 0, got {self.learning_rate}")
        _expect(self.iterations >= 1, f"iterations must be >= 1, got {self.iterations}")
        _expect(self.temperature > 0, f"temperature must be > 0, got {self.temperature}")
        _expect(
            len(self.tau_grid) > 0 and all(t > 0 for t in self.tau_grid),
            "tau_grid must be a non-empty list of positive values",
        )
        _expect(self.episodes >= 1, f"episodes must be >= 1, got {self.episodes}")
        _expect(self.mask_count >= 1, f"mask_count must be >= 1, got {self.mask_count}")
        _expect(
            0 < self.mask_fraction < 1,
            f"mask_fraction must be in (0, 1), got {self.mask_fraction}",
        )
        _expect(self.rounds >= 1, f"rounds must be >= 1, got {self.rounds}")
        _expect(self.embed_dim >= 0, f"embed_dim must be >= 0, got {self.embed_dim}")

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lambda_" else f.name
            value = getattr(self, f.name)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


_PARAM_FIELD_BY_KEY = {
    ("lambda" if f.name == "lambda_" else f.name): f.name for f in fields(AlgorithmParams)
}
_INT_PARAMS = {"iterations", "episodes", "mask_count", "rounds", "embed_dim"}
_LIST_PARAMS = {"tau_grid"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs besides the datasets themselves."""

    task: TaskSpec
    algorithm: str = "centroid"
    master_seed: int = 0
    query_strategy: str = "random"
    algorithm_params: AlgorithmParams = field(default_factory=AlgorithmParams)
    pinned_source: str | None = None

    def __post_init__(self) -> None:
        _expect(
            self.algorithm in ALGORITHMS,
            f"unknown algorithm {self.algorithm!r} (valid: {', '.join(ALGORITHMS)})",
        )
        _expect(
            self.query_strategy in QUERY_STRATEGIES,
            f"unknown query_strategy {self.query_strategy!r} "
            f"(valid: {', '.join(QUERY_STRATEGIES)})",
        )
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int):
            raise SchemaViolation(f"master_seed must be an integer, got {self.master_seed!r}")
        _expect(0 <= self.master_seed < 2**64, "master_seed must fit in 64 unsigned bits")


# --- overrides -----------------------------------------------------------------

Scalar = bool | int | float | str
OverrideValue = Scalar | tuple[Scalar, ...]


@dataclass(frozen=True)
class OverrideSet:
    """Ordered ``key=value`` assignments; later entries win on the same key."""

    entries: tuple[tuple[str, OverrideValue], ...]

    @staticmethod
    def parse(tokens: list[str] | tuple[str, ...]) -> "OverrideSet":
        """Parse command-line tokens of the form ``a.b.c=value``."""
        entries = []
        for token in tokens:
            key, sep, raw = token.partition("=")
            if not sep:
                raise MalformedInput(f"override {token!r} is missing '='")
            if not _KEY_RE.match(key):
                raise MalformedInput(f"override key {key!r} is not a dotted identifier path")
            entries.append((key, _parse_value(raw)))
        return OverrideSet(tuple(entries))


def _parse_scalar(raw: str) -> Scalar:
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _parse_value(raw: str) -> OverrideValue:
    if "," in raw:
        return tuple(_parse_scalar(part) for part in raw.split(","))
    return _parse_scalar(raw)


def _coerce_str(key: str, value: OverrideValue) -> str:
    if not isinstance(value, str):
        raise TypeMismatch(f"{key} expects a string, got {value!r}")
    return value


def _coerce_int(key: str, value: OverrideValue) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatch(f"{key} expects an integer, got {value!r}")
    return value


def _coerce_float(key: str, value: OverrideValue) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatch(f"{key} expects a number, got {value!r}")
    return float(value)


def _coerce_number_list(key: str, value: OverrideValue) -> tuple[float, ...]:
    items = value if isinstance(value, tuple) else (value,)
    out = []
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise TypeMismatch(f"{key} expects numbers, got {item!r}")
        out.append(float(item))
    return tuple(out)


def apply_overrides(config: ExperimentConfig, overrides: OverrideSet) -> ExperimentConfig:
    """Return a config equal to ``config`` except at the overridden paths.

    Pure and idempotent; raises :class:`UnknownKey` or :class:`TypeMismatch`
    without touching the input.
    """
    updates: dict[str, Any] = {}
    param_updates: dict[str, Any] = {}
    for key, value in overrides.entries:
        if key == "algorithm":
            updates["algorithm"] = _coerce_str(key, value)
        elif key == "master_seed":
            updates["master_seed"] = _coerce_int(key, value)
        elif key == "query_strategy":
            updates["query_strategy"] = _coerce_str(key, value)
        elif key == "pinned_source":
            updates["pinned_source"] = _coerce_str(key, value)
        elif key.startswith("algorithm_params."):
            sub = key[len("algorithm_params."):]
            if sub not in _PARAM_FIELD_BY_KEY:
                raise UnknownKey(f"unknown algorithm_params key {sub!r}")
            field_name = _PARAM_FIELD_BY_KEY[sub]
            if sub in _LIST_PARAMS:
                param_updates[field_name] = _coerce_number_list(key, value)
            elif sub in _INT_PARAMS:
                param_updates[field_name] = _coerce_int(key, value)
            else:
                param_updates[field_name] = _coerce_float(key, value)
        else:
            raise UnknownKey(f"unknown config key {key!r}")
    if param_updates:
        updates["algorithm_params"] = replace(config.algorithm_params, **param_updates)
    return replace(config, **updates) if updates else config


# --- plan validation -------------------------------------------------------------


@dataclass(frozen=True)
class ValidatedPlan:
    """Outcome of dry-run validation: resolved sources, warnings, errors."""

    config: ExperimentConfig
    source_candidates: tuple[str, ...]
    warnings: tuple[str, ...]
    errors: tuple[HarnessError, ...]

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_first(self) -> None:
        if self.errors:
            raise self.errors[0]


def validate_plan(
    config: ExperimentConfig, registry: Mapping[str, "DatasetHandle"]
) -> ValidatedPlan:
    """Check a config against a dataset registry without running anything.

    Collects every problem instead of stopping at the first; unknown
    whitelist entries are dropped with a warning rather than an error.
    """
    from shiftlab.schedule import build_schedule

    warnings: list[str] = []
    errors: list[HarnessError] = []
    task = config.task

    if task.problem_type == "object_detection":
        errors.append(UnsupportedProblemType("problem_type 'object_detection' is not supported"))

    candidates = []
    for name in task.whitelist:
        if name in registry:
            candidates.append(name)
        else:
            warnings.append(f"whitelist dataset {name!r} is not registered; skipped")
    if config.pinned_source is not None and config.pinned_source not in registry:
        errors.append(UnknownTargetDataset(f"pinned source {config.pinned_source!r} is not registered"))
    if not candidates and config.pinned_source is None:
        errors.append(EmptyWhitelist("no whitelist dataset resolved and no pinned_source given"))

    class_lists = {}
    for index, stage in enumerate(task.stages):
        handle = registry.get(stage.dataset)
        if handle is None:
            errors.append(
                UnknownTargetDataset(f"stage {index} dataset {stage.dataset!r} is not registered")
            )
            continue
        class_lists[stage.dataset] = handle.class_names
        try:
            schedule = build_schedule(
                stage.seed_budgets,
                stage.label_budgets,
                class_count=len(handle.class_names),
                pool_size=len(handle.train_pool),
            )
        except BudgetExceedsPool as exc:
            errors.append(BudgetExceedsPool(f"stage {index} ({stage.dataset!r}): {exc}"))
        else:
            warnings.extend(f"stage {index} ({stage.dataset!r}): {w}" for w in schedule.warnings)

    for name in candidates + list(class_lists):
        handle = registry.get(name)
        if handle is None:
            continue
        class_lists.setdefault(name, handle.class_names)
    distinct = {tuple(v) for v in class_lists.values()}
    if len(distinct) > 1:
        errors.append(
            SchemaViolation(
                "datasets in the plan disagree on class lists: "
                + ", ".join(sorted(class_lists))
            )
        )

    return ValidatedPlan(config, tuple(candidates), tuple(warnings), tuple(errors))
