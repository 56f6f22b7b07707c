"""Data sources for the three benchmarks and the mini-batch iterator"""
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from ..errors import DatasetError, UsageError
from ..utils.logger import setup_logger
from .models import Batch

logger = setup_logger(__name__)


class TaskKind(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"
    DENOISING = "denoising"


@dataclass(frozen=True)
class Dataset:
    """Immutable samples plus a disjoint, covering train/test split"""
    X: np.ndarray
    y: np.ndarray
    task: TaskKind
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise DatasetError(f"Features {self.X.shape} and targets {self.y.shape} do not line up")
        both = np.concatenate([self.train_idx, self.test_idx])
        if len(both) != len(self.y) or len(np.unique(both)) != len(self.y):
            raise DatasetError("Train and test splits must be disjoint and cover every sample")

    @property
    def input_size(self) -> int:
        return self.X.shape[1]

    @property
    def n_train(self) -> int:
        return len(self.train_idx)

    def train_batch(self, batch_id: int = 0) -> Batch:
        return Batch(self.X[self.train_idx], self.y[self.train_idx], batch_id)

    def test_split(self):
        return self.X[self.test_idx], self.y[self.test_idx]


def _leading_split(n_train: int, n_test: int):
    return np.arange(n_train), np.arange(n_train, n_train + n_test)


def load_csv(path, label_column: str, train_size: Optional[int] = None,
             task: TaskKind = TaskKind.CLASSIFICATION, seed: int = 0,
             standardize: bool = True) -> Dataset:
    """Load a numeric CSV with a header row

    Args:
        path: CSV file path
        label_column: Name of the target column
        train_size: Number of training rows; the rest (after a seeded shuffle)
            is the test split. ``None`` puts every row in the train split.
        task: Task kind recorded on the dataset
        seed: Shuffle seed for the split
        standardize: Scale features to zero mean / unit variance using
            training-split statistics only

    Returns:
        Dataset

    Raises:
        DatasetError: on ragged rows, non-numeric cells, a missing label column
            or too few rows to split
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DatasetError(f"{path}: ragged or malformed rows: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DatasetError(f"{path}: file is empty") from e

    if label_column not in frame.columns:
        raise DatasetError(
            f"{path}: label column '{label_column}' not found (columns: {', '.join(frame.columns)})"
        )
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0).to_numpy())
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        # header is line 1
        raise DatasetError(
            f"{path}: non-numeric or missing cell at line {row + 2}, column '{frame.columns[col]}': "
            f"'{frame.iat[row, col]}'"
        )
    n = len(numeric)
    if n < 2:
        raise DatasetError(f"{path}: need at least 2 rows to build a dataset, found {n}")

    y = numeric[label_column].to_numpy(dtype=float)
    X = numeric.drop(columns=[label_column]).to_numpy(dtype=float)
    if X.shape[1] == 0:
        raise DatasetError(f"{path}: no feature columns besides '{label_column}'")

    if train_size is None:
        train_idx, test_idx = np.arange(n), np.arange(0)
    else:
        if not 1 <= train_size < n:
            raise DatasetError(f"{path}: train_size must be in [1, {n - 1}] for {n} rows, got {train_size}")
        train_idx, test_idx = train_test_split(np.arange(n), train_size=train_size, random_state=seed)
        train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)

    if standardize:
        X = _standardize(X, train_idx, path)
    logger.info(f"Loaded {n} rows x {X.shape[1]} features from {path} "
                f"({len(train_idx)} train / {len(test_idx)} test)")
    return Dataset(X, y, task, train_idx, test_idx)


def _standardize(X: np.ndarray, train_idx: np.ndarray, source) -> np.ndarray:
    mean = X[train_idx].mean(axis=0)
    std = X[train_idx].std(axis=0)
    flat = std == 0
    if flat.any():
        logger.warning(f"{source}: zero-variance feature(s) {np.flatnonzero(flat).tolist()} left unscaled")
        std = np.where(flat, 1.0, std)
    return (X - mean) / std


def load_patch_csv(path, label_column: str = "target", train_size: Optional[int] = None,
                   seed: int = 0) -> Dataset:
    """Flattened patches plus a clean center-pixel target per row, used unscaled"""
    return load_csv(path, label_column, train_size=train_size, task=TaskKind.DENOISING,
                    seed=seed, standardize=False)


def keijzer12(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x * y + np.sin((x - 1.0) * (y - 1.0))


def gen_keijzer12(n: int, seed: int, lo: float = -3.0, hi: float = 3.0, n_test: int = 0) -> Dataset:
    """Keijzer-12 samples, x and y uniform in [lo, hi]; the first ``n`` are training"""
    if n < 1:
        raise DatasetError(f"n must be >= 1, got {n}")
    if not lo < hi:
        raise DatasetError(f"Sampling range requires lo < hi, got [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n + n_test, 2))
    target = keijzer12(X[:, 0], X[:, 1])
    train_idx, test_idx = _leading_split(n, n_test)
    return Dataset(X, target, TaskKind.REGRESSION, train_idx, test_idx)


def smooth_patch(rng: np.random.Generator, side: int, n_waves: int = 3) -> np.ndarray:
    """A clean patch: sum of random-orientation sinusoids around 0.5, clipped to [0, 1]"""
    coords = np.arange(side) - side // 2
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    field = np.full((side, side), 0.5)
    for _ in range(n_waves):
        theta = rng.uniform(0.0, math.pi)
        freq = rng.uniform(0.02, 0.15)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amplitude = rng.uniform(0.1, 0.3)
        field += amplitude * np.sin(2.0 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
    return np.clip(field, 0.0, 1.0)


def gen_noisy_patches(n: int, patch_side: int, sigma: float, seed: int, n_test: int = 0) -> Dataset:
    """Noisy flattened patches as features, clean center pixel as target"""
    if patch_side < 1 or patch_side % 2 == 0:
        raise DatasetError(f"patch_side must be odd so a center pixel exists, got {patch_side}")
    if sigma < 0:
        raise DatasetError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    total = n + n_test
    center = (patch_side * patch_side) // 2
    clean = np.stack([smooth_patch(rng, patch_side).ravel() for _ in range(total)]) if total else \
        np.empty((0, patch_side * patch_side))
    noisy = clean + rng.normal(0.0, sigma, size=clean.shape) if sigma > 0 else clean.copy()
    train_idx, test_idx = _leading_split(n, n_test)
    return Dataset(noisy, clean[:, center].copy(), TaskKind.DENOISING, train_idx, test_idx)


def gen_two_class(n: int, seed: int, n_test: int = 0) -> Dataset:
    """Four features, two classes split by a curved boundary (banknote-shaped stand-in)"""
    rng = np.random.default_rng(seed)
    total = n + n_test
    labels = rng.integers(0, 2, size=total)
    centers = np.array([[1.0, 1.5, -0.5, 0.0], [-1.0, -1.0, 1.0, 0.5]])
    X = centers[labels] + rng.normal(0.0, 1.0, size=(total, 4))
    # curvature: shift class 1 along x0 by a quadratic in x1
    X[:, 0] -= 0.3 * labels * X[:, 1] ** 2
    train_idx, test_idx = _leading_split(n, n_test)
    return Dataset(X, labels.astype(float), TaskKind.CLASSIFICATION, train_idx, test_idx)


class BatchIterator:
    """Mini-batches that partition a seeded shuffle of the train split, epoch after epoch"""

    def __init__(self, dataset: Dataset, batch_size: int, rng: np.random.Generator):
        """
        Initialize batch iterator

        Args:
            dataset: Source dataset (only its train split is used)
            batch_size: Samples per batch; the last batch of an epoch may be shorter
            rng: Generator owned by the iterator, used for epoch shuffles
        """
        if not 1 <= batch_size <= dataset.n_train:
            raise UsageError(
                f"batch_size must be in [1, {dataset.n_train}] (train split size), got {batch_size}"
            )
        self.dataset = dataset
        self.batch_size = batch_size
        self.rng = rng
        self.cursor = 0
        self.batches_served = 0
        self._order = self._shuffle()

    def _shuffle(self) -> np.ndarray:
        return self.dataset.train_idx[self.rng.permutation(self.dataset.n_train)]

    def next_batch(self) -> Batch:
        if self.cursor >= len(self._order):
            self._order = self._shuffle()
            self.cursor = 0
        idx = self._order[self.cursor:self.cursor + self.batch_size]
        self.cursor += len(idx)
        batch = Batch(self.dataset.X[idx], self.dataset.y[idx], self.batches_served)
        self.batches_served += 1
        return batch

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(self.dataset.n_train / self.batch_size)
