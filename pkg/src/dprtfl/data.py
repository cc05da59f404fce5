"""Datasets for the simulator.

* ``generate_synthetic``: two Gaussian classes with unit-variance features.
  The class means differ by ``separation / (j + 1)`` along feature ``j``, so a
  few features carry most of the signal (as in typical tabular data).
* ``partition``: label-skewed split across clients via per-class Dirichlet
  proportions, followed by a per-client validation carve-out.
* ``ingest_csv``: merge the credit-approval application and credit-history
  tables, derive a good/bad target, and preprocess with statistics fitted on
  the training split only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.compose import ColumnTransformer
from sklearn.impute import SimpleImputer
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import OneHotEncoder, StandardScaler

from .errors import InvalidConfigError, InvalidInputError, PartitionError
from .trainer import Dataset

DAYS_PER_YEAR = 365.0
UNEMPLOYED_SENTINEL = 365243
MAX_PARTITION_ATTEMPTS = 100


def generate_synthetic(n: int, d: int, class_balance: float = 0.5, seed: int = 0, separation: float = 2.0) -> Dataset:
    if n < 10 or d < 1:
        raise InvalidInputError(f"need n >= 10 and d >= 1, got n={n}, d={d}")
    if not 0 < class_balance < 1:
        raise InvalidInputError("class_balance must lie in (0, 1)")
    rng = np.random.default_rng(int(seed))
    y = (rng.random(n) < class_balance).astype(np.int64)
    shift = separation / np.arange(1, d + 1)
    x = rng.standard_normal((n, d)) + np.outer(y - 0.5, shift)
    return Dataset(x, y)


def split_indices(n: int, seed: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train, test) row indices; the test set gets round(n * f) rows."""
    if not 0 < test_fraction < 1:
        raise InvalidConfigError("test_fraction must lie in (0, 1)")
    order = np.random.default_rng(int(seed)).permutation(n)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise InvalidInputError(f"cannot split {n} rows with test_fraction={test_fraction}")
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def train_test_split(data: Dataset, seed: int, test_fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(data.n, seed, test_fraction)
    return data.subset(tr), data.subset(te)


# ------------------------------------------------------------------ partition

@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int = 5
    dirichlet_alpha: float = 1.0
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.num_clients < 1:
            raise InvalidConfigError("num_clients must be >= 1")
        if not self.dirichlet_alpha > 0:
            raise InvalidConfigError("dirichlet_alpha must be > 0")
        if not 0 <= self.val_fraction <= 0.5:
            raise InvalidConfigError("val_fraction must lie in [0, 0.5]")


@dataclass(frozen=True, eq=False)
class ClientData:
    train: Dataset
    val: Optional[Dataset]
    indices: np.ndarray
    val_indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.indices.size + self.val_indices.size)


def dirichlet_indices(labels, num_clients: int, alpha: float, rng) -> list[np.ndarray]:
    labels = np.asarray(labels)
    buckets = [[] for _ in range(num_clients)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        props = rng.dirichlet(np.full(num_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * idx.size).astype(np.int64)
        for k, part in enumerate(np.split(idx, cuts)):
            buckets[k].extend(part.tolist())
    return [np.sort(np.array(b, dtype=np.int64)) for b in buckets]


def partition(data: Dataset, spec: PartitionSpec) -> list[ClientData]:
    """Split ``data`` across clients; every row lands in exactly one client split."""
    rng = np.random.default_rng(int(spec.seed))
    for _ in range(MAX_PARTITION_ATTEMPTS):
        parts = dirichlet_indices(data.labels, spec.num_clients, spec.dirichlet_alpha, rng)
        if all(p.size >= 1 for p in parts):
            break
    else:
        raise PartitionError(
            f"could not give all {spec.num_clients} clients a sample after {MAX_PARTITION_ATTEMPTS} draws"
        )
    out = []
    for k, idx in enumerate(parts):
        shuffled = np.random.default_rng([int(spec.seed), k]).permutation(idx)
        n_val = int(math.floor(spec.val_fraction * idx.size))
        if spec.val_fraction > 0 and n_val == 0 and idx.size >= 2:
            n_val = 1
        val_idx, train_idx = np.sort(shuffled[:n_val]), np.sort(shuffled[n_val:])
        out.append(ClientData(
            train=data.subset(train_idx),
            val=data.subset(val_idx) if n_val else None,
            indices=train_idx,
            val_indices=val_idx,
        ))
    return out


# ---------------------------------------------------------------- CSV ingest

@dataclass(frozen=True)
class PreprocessPlan:
    """Column roles and derivation rules for the credit-approval tables."""

    id_column: str = "ID"
    status_column: str = "STATUS"
    # 2..5 mean 60+ days past due in the credit-history coding
    bad_statuses: tuple = ("2", "3", "4", "5")
    numeric_columns: tuple = (
        "CNT_CHILDREN", "AMT_INCOME_TOTAL", "DAYS_BIRTH", "DAYS_EMPLOYED", "CNT_FAM_MEMBERS",
    )
    categorical_columns: tuple = (
        "CODE_GENDER", "FLAG_OWN_CAR", "FLAG_OWN_REALTY", "NAME_INCOME_TYPE",
        "NAME_EDUCATION_TYPE", "NAME_FAMILY_STATUS", "NAME_HOUSING_TYPE",
    )
    birth_column: Optional[str] = "DAYS_BIRTH"
    employed_column: Optional[str] = "DAYS_EMPLOYED"
    test_fraction: float = 0.2


def derive_target(credit: pd.DataFrame, plan: PreprocessPlan) -> pd.Series:
    """1 ("bad") if any monthly status is in ``plan.bad_statuses``, else 0."""
    status = credit[plan.status_column].astype(str).str.strip()
    bad = status.isin(plan.bad_statuses)
    return bad.groupby(credit[plan.id_column]).any().astype(np.int64).rename("TARGET")


def transform_days(frame: pd.DataFrame, plan: PreprocessPlan) -> pd.DataFrame:
    """Day counts (negative = days before application) become positive years."""
    out = frame.copy()
    if plan.birth_column and plan.birth_column in out:
        out[plan.birth_column] = -pd.to_numeric(out[plan.birth_column], errors="coerce") / DAYS_PER_YEAR
    if plan.employed_column and plan.employed_column in out:
        days = pd.to_numeric(out[plan.employed_column], errors="coerce")
        unemployed = days == UNEMPLOYED_SENTINEL
        years = -days / DAYS_PER_YEAR
        years[unemployed] = 0.0
        out[plan.employed_column] = years
        out["IS_UNEMPLOYED"] = unemployed.astype(np.float64)
    return out


def load_merged(application_path, credit_path, plan: PreprocessPlan) -> pd.DataFrame:
    for p in (application_path, credit_path):
        if not Path(p).is_file():
            raise InvalidInputError(f"missing input file: {p}")
    app = pd.read_csv(application_path, encoding="utf-8")
    credit = pd.read_csv(credit_path, encoding="utf-8", dtype={plan.status_column: str})
    for name, frame in (("application", app), ("credit", credit)):
        if plan.id_column not in frame:
            raise InvalidInputError(f"{name} file lacks join key {plan.id_column!r}")
    app = app.drop_duplicates(subset=plan.id_column, keep="first")
    merged = app.merge(derive_target(credit, plan).reset_index(), on=plan.id_column, how="inner")
    if merged.empty:
        raise InvalidInputError("no rows left after merging on the applicant id")
    merged = merged.sort_values(plan.id_column, kind="mergesort").reset_index(drop=True)
    return transform_days(merged, plan)


@dataclass
class Preprocessor:
    plan: PreprocessPlan
    numeric: list = field(default_factory=list)
    categorical: list = field(default_factory=list)
    transformer: Optional[ColumnTransformer] = None

    def fit(self, frame: pd.DataFrame) -> "Preprocessor":
        self.numeric = [c for c in self.plan.numeric_columns if c in frame]
        if "IS_UNEMPLOYED" in frame:
            self.numeric.append("IS_UNEMPLOYED")
        self.categorical = [c for c in self.plan.categorical_columns if c in frame]
        if not self.numeric and not self.categorical:
            raise InvalidInputError("none of the planned feature columns are present")
        num = Pipeline([("impute", SimpleImputer(strategy="median")), ("scale", StandardScaler())])
        cat = Pipeline([
            ("impute", SimpleImputer(strategy="most_frequent")),
            ("onehot", OneHotEncoder(handle_unknown="ignore", sparse_output=False)),
        ])
        self.transformer = ColumnTransformer([("num", num, self.numeric), ("cat", cat, self.categorical)])
        self.transformer.fit(self._prepare(frame))
        return self

    def _prepare(self, frame: pd.DataFrame) -> pd.DataFrame:
        out = frame[self.numeric + self.categorical].copy()
        for c in self.numeric:
            out[c] = pd.to_numeric(out[c], errors="coerce").astype(np.float64)
        for c in self.categorical:
            col = out[c]
            out[c] = col.where(col.isna(), col.astype(str)).astype(object)
        return out

    def transform(self, frame: pd.DataFrame) -> np.ndarray:
        return np.asarray(self.transformer.transform(self._prepare(frame)), dtype=np.float64)

    def fitted_statistics(self) -> dict:
        num = self.transformer.named_transformers_["num"]
        cat = self.transformer.named_transformers_["cat"]
        return {
            "medians": dict(zip(self.numeric, num.named_steps["impute"].statistics_.tolist())),
            "means": dict(zip(self.numeric, num.named_steps["scale"].mean_.tolist())),
            "scales": dict(zip(self.numeric, num.named_steps["scale"].scale_.tolist())),
            "modes": dict(zip(self.categorical, cat.named_steps["impute"].statistics_.tolist()))
            if self.categorical else {},
            "vocabularies": {
                c: list(v) for c, v in zip(self.categorical, cat.named_steps["onehot"].categories_)
            } if self.categorical else {},
        }


def ingest_csv(application_path, credit_path, plan: PreprocessPlan = PreprocessPlan(), seed: int = 0):
    """Load, merge, split 80/20, and preprocess the two credit tables.

    Returns ``(train, test)`` Datasets. Imputation, scaling and one-hot
    vocabularies are fitted on the training rows only; categories unseen in
    training encode as all zeros.
    """
    frame = load_merged(application_path, credit_path, plan)
    if len(frame) < 2:
        raise InvalidInputError("need at least two merged rows to split")
    tr, te = split_indices(len(frame), seed, plan.test_fraction)
    train_frame, test_frame = frame.iloc[tr], frame.iloc[te]
    prep = Preprocessor(plan).fit(train_frame)
    train = Dataset(prep.transform(train_frame), train_frame["TARGET"].to_numpy())
    test = Dataset(prep.transform(test_frame), test_frame["TARGET"].to_numpy())
    return train, test
