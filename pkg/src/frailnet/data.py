"""Censored datasets: CSV ingestion, schema, preprocessing, CV splits.

A dataset is (times, events, covariates) with expanded column names.
Categorical columns are one-hot encoded with one indicator per level
(levels sorted, full encoding).  Continuous columns can be standardized
with statistics fitted on a training split only.

The schema file and the run-config file share one plain key-value
format: `key = value` per line, `#` comments, blank lines ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, SpecError


def parse_key_values(text: str) -> dict:
    """Parse the `key = value` format used by schema and config files."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise DataFormatError(f"line {lineno}: empty key")
        if key in out:
            raise DataFormatError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _split_list(value: str):
    return tuple(part.strip() for part in value.split(",") if part.strip())


@dataclass(frozen=True)
class Schema:
    """Column roles for a CSV file."""

    time_col: str = "time"
    event_col: str = "event"
    continuous: tuple = ()
    categorical: tuple = ()

    def __post_init__(self):
        names = [self.time_col, self.event_col, *self.continuous, *self.categorical]
        if len(set(names)) != len(names):
            raise SpecError(f"schema assigns a column twice: {names}")
        if not self.continuous and not self.categorical:
            raise SpecError("schema declares no feature columns")

    @classmethod
    def from_text(cls, text: str) -> "Schema":
        kv = parse_key_values(text)
        known = {"time", "event", "continuous", "categorical"}
        unknown = set(kv) - known
        if unknown:
            raise DataFormatError(f"unknown schema keys: {sorted(unknown)}")
        return cls(
            time_col=kv.get("time", "time"),
            event_col=kv.get("event", "event"),
            continuous=_split_list(kv.get("continuous", "")),
            categorical=_split_list(kv.get("categorical", "")),
        )

    @classmethod
    def from_file(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class CensoredSample:
    time: float
    event: int
    covariates: np.ndarray


@dataclass
class Dataset:
    """Immutable-by-convention container of censored observations."""

    times: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    columns: list = field(default_factory=list)
    continuous_mask: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.events = np.asarray(self.events, dtype=np.int64)
        self.covariates = np.asarray(self.covariates, dtype=np.float64)
        if self.covariates.ndim != 2:
            raise SpecError("covariates must be 2-d")
        n, d = self.covariates.shape
        if self.times.shape != (n,) or self.events.shape != (n,):
            raise SpecError("times/events/covariates length mismatch")
        if not self.columns:
            self.columns = [f"x{j}" for j in range(d)]
        if len(self.columns) != d:
            raise SpecError("column names do not match covariate dim")
        if self.continuous_mask is None:
            self.continuous_mask = np.ones(d, dtype=bool)
        self.continuous_mask = np.asarray(self.continuous_mask, dtype=bool)
        if np.any(self.times < 0):
            raise SpecError("times must be >= 0")
        if not np.all(np.isin(self.events, (0, 1))):
            raise SpecError("events must be 0 or 1")
        if not np.all(np.isfinite(self.covariates)):
            raise SpecError("covariates must be finite")

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self):
        return self.covariates.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            times=self.times[idx],
            events=self.events[idx],
            covariates=self.covariates[idx],
            columns=list(self.columns),
            continuous_mask=self.continuous_mask.copy(),
        )

    def samples(self):
        return [
            CensoredSample(float(t), int(e), z)
            for t, e, z in zip(self.times, self.events, self.covariates)
        ]

    @property
    def censoring_rate(self) -> float:
        return float(np.mean(self.events == 0))


def _parse_float(raw, row, col):
    if raw is None or raw.strip() == "":
        raise DataFormatError(f"row {row}, column {col!r}: missing value")
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(f"row {row}, column {col!r}: not a number: {raw!r}") from None
    if not np.isfinite(value):
        raise DataFormatError(f"row {row}, column {col!r}: non-finite value {raw!r}")
    return value


def load_csv(path, schema: Schema, levels: dict | None = None) -> Dataset:
    """Read a CSV with a header row into a Dataset.

    levels optionally pins the category levels per categorical column
    (as stored in a model file) so a test split expands to exactly the
    training columns; unseen values are then an error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    index = {}
    for col in (schema.time_col, schema.event_col, *schema.continuous, *schema.categorical):
        if col not in header:
            raise DataFormatError(f"{path}: required column {col!r} not in header {header}")
        index[col] = header.index(col)

    n = len(rows)
    times = np.empty(n)
    events = np.empty(n, dtype=np.int64)
    cont = np.empty((n, len(schema.continuous)))
    cat_raw = [[] for _ in schema.categorical]
    for r, row in enumerate(rows, start=2):  # header is row 1
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
        times[r - 2] = _parse_float(row[index[schema.time_col]], r, schema.time_col)
        ev_raw = row[index[schema.event_col]].strip()
        if ev_raw not in ("0", "1"):
            raise DataFormatError(
                f"{path}: row {r}, column {schema.event_col!r}: event must be 0 or 1, got {ev_raw!r}"
            )
        events[r - 2] = int(ev_raw)
        for j, col in enumerate(schema.continuous):
            cont[r - 2, j] = _parse_float(row[index[col]], r, col)
        for j, col in enumerate(schema.categorical):
            raw = row[index[col]].strip()
            if raw == "":
                raise DataFormatError(f"{path}: row {r}, column {col!r}: missing value")
            cat_raw[j].append(raw)
    if np.any(times < 0):
        r = int(np.argmax(times < 0)) + 2
        raise DataFormatError(f"{path}: row {r}: negative time")

    blocks = [cont]
    columns = list(schema.continuous)
    mask = [True] * len(schema.continuous)
    for j, col in enumerate(schema.categorical):
        seen = sorted(set(cat_raw[j]))
        use = list(levels[col]) if levels and col in levels else seen
        unknown = set(cat_raw[j]) - set(use)
        if unknown:
            raise DataFormatError(
                f"{path}: column {col!r}: values {sorted(unknown)} not in expected levels {use}"
            )
        onehot = np.zeros((n, len(use)))
        pos = {lv: k for k, lv in enumerate(use)}
        for r, raw in enumerate(cat_raw[j]):
            onehot[r, pos[raw]] = 1.0
        blocks.append(onehot)
        columns.extend(f"{col}={lv}" for lv in use)
        mask.extend([False] * len(use))
    covariates = np.hstack(blocks) if blocks else np.empty((n, 0))
    return Dataset(
        times=times,
        events=events,
        covariates=covariates,
        columns=columns,
        continuous_mask=np.array(mask, dtype=bool),
    )


def category_levels(dataset: Dataset) -> dict:
    """Recover {categorical column: levels} from expanded column names."""
    levels: dict = {}
    for name, is_cont in zip(dataset.columns, dataset.continuous_mask):
        if is_cont or "=" not in name:
            continue
        col, lv = name.split("=", 1)
        levels.setdefault(col, []).append(lv)
    return levels


def write_csv(path, header, rows) -> None:
    """Write rows of floats/strings with full float precision (repr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


@dataclass(frozen=True)
class Scaling:
    """Per-column standardization statistics fitted on a training split."""

    means: np.ndarray
    stds: np.ndarray

    def to_dict(self, dataset: Dataset) -> dict:
        return {
            "columns": list(dataset.columns),
            "continuous": [bool(b) for b in dataset.continuous_mask],
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "levels": category_levels(dataset),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaling":
        return cls(means=np.asarray(d["means"]), stds=np.asarray(d["stds"]))


def fit_scaler(train: Dataset) -> Scaling:
    """Mean/std per continuous column, computed on TRAIN ONLY.

    Std uses the population denominator n; constant columns get std 1
    so scaling is a no-op there.  One-hot columns are never scaled.
    """
    if len(train) == 0:
        raise SpecError("cannot fit scaler on an empty dataset")
    means = np.zeros(train.dim)
    stds = np.ones(train.dim)
    cont = train.continuous_mask
    if np.any(cont):
        cols = train.covariates[:, cont]
        means[cont] = cols.mean(axis=0)
        sd = cols.std(axis=0)  # population (ddof=0)
        stds[cont] = np.where(sd == 0.0, 1.0, sd)
    return Scaling(means=means, stds=stds)


def apply_scaler(dataset: Dataset, scaling: Scaling) -> Dataset:
    """Standardize with previously fitted statistics; pure function."""
    if scaling.means.shape != (dataset.dim,):
        raise SpecError("scaling dimensions do not match dataset")
    return Dataset(
        times=dataset.times.copy(),
        events=dataset.events.copy(),
        covariates=(dataset.covariates - scaling.means) / scaling.stds,
        columns=list(dataset.columns),
        continuous_mask=dataset.continuous_mask.copy(),
    )


@dataclass(frozen=True)
class CvSplit:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class CvPlan:
    """Repeated k-fold splits with a validation holdout inside each
    training portion: splits[r][f] is the f-th fold of repeat r."""

    n_folds: int
    holdout_fraction: float
    n_repeats: int
    seed: int
    splits: list


def make_cv_plan(
    n: int,
    n_folds: int = 5,
    holdout_fraction: float = 0.20,
    n_repeats: int = 10,
    seed: int = 0,
) -> CvPlan:
    """Seeded repeated k-fold plan.

    Each repeat shuffles indices with its own seed substream, cuts
    n_folds test folds of size floor(n/k) or one more, and carves
    holdout_fraction of the remaining indices into a validation set.
    """
    if n_folds < 2:
        raise SpecError("need at least 2 folds")
    if n < n_folds:
        raise SpecError(f"dataset of size {n} cannot be split into {n_folds} folds")
    if not 0.0 <= holdout_fraction < 1.0:
        raise SpecError("holdout_fraction must be in [0, 1)")
    if n_repeats < 1:
        raise SpecError("n_repeats must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_repeats)
    splits = []
    for r in range(n_repeats):
        rng = np.random.default_rng(children[r])
        perm = rng.permutation(n)
        folds = np.array_split(perm, n_folds)
        per_repeat = []
        for f in range(n_folds):
            test = folds[f]
            rest = np.concatenate([folds[g] for g in range(n_folds) if g != f])
            n_valid = int(round(holdout_fraction * rest.size))
            valid, train = rest[:n_valid], rest[n_valid:]
            if train.size == 0:
                raise SpecError("training portion is empty; reduce folds or holdout")
            per_repeat.append(
                CvSplit(train=np.sort(train), valid=np.sort(valid), test=np.sort(test))
            )
        splits.append(per_repeat)
    return CvPlan(
        n_folds=n_folds,
        holdout_fraction=holdout_fraction,
        n_repeats=n_repeats,
        seed=seed,
        splits=splits,
    )
