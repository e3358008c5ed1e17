"""IDX ingestion, PCA reduction and synthetic fallback datasets."""
import math
from pathlib import Path
from typing import Dict, NamedTuple, Optional

import numpy as np
import pandas as pd
import ujson as json

from . import logger
from .constants import IdxMagic
from .exceptions import DomainError, IdxParseError
from .util import float_repr, read_csv, write_csv

IDX_UBYTE = 0x08
PIXEL_SCALE = 255.0
MAX_IDX_ELEMENTS = 2 ** 31


class Dataset(NamedTuple):
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_scale: Dict

    @classmethod
    def create(cls, features, labels, num_classes=None, feature_scale=None):
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        labels = np.asarray(labels, dtype=np.int64)
        if features.shape[0] < 1 or features.shape[0] != labels.shape[0]:
            raise DomainError(f"{features.shape[0]} samples but {labels.shape[0]} labels")
        num_classes = int(num_classes or labels.max() + 1)
        if labels.min() < 0 or labels.max() >= num_classes:
            raise DomainError(f"Labels must lie in [0, {num_classes})")
        return cls(features, labels, num_classes, feature_scale or {"kind": "none"})

    def __len__(self):
        return self.labels.size


def parse_idx(raw: bytes, path=None) -> np.ndarray:
    """Images come back flattened row-major and scaled to [0, 1]; labels as integers."""
    if len(raw) < 4:
        raise IdxParseError("truncated magic number", offset=len(raw), path=path)
    magic = int.from_bytes(raw[:4], "big")
    if magic >> 16:
        raise IdxParseError(f"bad magic number {magic:#010x}", offset=0, path=path)
    if (magic >> 8) & 0xFF != IDX_UBYTE or magic not in set(IdxMagic):
        raise IdxParseError(f"unsupported element type in magic {magic:#010x}", offset=0, path=path)

    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxParseError("truncated dimension sizes", offset=len(raw), path=path)
    shape = tuple(int(size) for size in np.frombuffer(raw, dtype=">u4", count=ndim, offset=4))
    count = math.prod(shape)
    if count > MAX_IDX_ELEMENTS:
        raise IdxParseError(f"dimension overflow: {shape}", offset=4, path=path)
    if len(raw) < header + count:
        raise IdxParseError(f"truncated payload, expected {count} bytes", offset=len(raw), path=path)

    values = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(shape)
    if magic == IdxMagic.LABELS:
        return values.astype(np.int64)
    return values.reshape(shape[0], -1) / PIXEL_SCALE


def load_idx(path) -> np.ndarray:
    path = Path(path)
    return parse_idx(path.read_bytes(), path=path)


def to_idx_bytes(values) -> bytes:
    values = np.asarray(values)
    if values.ndim == 1:
        magic = IdxMagic.LABELS
    elif values.ndim == 3:
        magic = IdxMagic.IMAGES
    else:
        raise DomainError(f"IDX writer supports 1-D labels and 3-D images, got {values.ndim}-D")
    if values.min(initial=0) < 0 or values.max(initial=0) > 255:
        raise DomainError("IDX values must fit in an unsigned byte")
    header = int(magic).to_bytes(4, "big") + np.asarray(values.shape, dtype=">u4").tobytes()
    return header + values.astype(np.uint8).tobytes()


def save_idx(values, path) -> Path:
    path = Path(path)
    path.write_bytes(to_idx_bytes(values))
    return path


def load_mnist(images_path, labels_path, limit=None) -> Dataset:
    features = load_idx(images_path)
    labels = load_idx(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise DomainError(f"{features.shape[0]} images but {labels.shape[0]} labels")
    if limit:
        features, labels = features[:limit], labels[:limit]
    logger.info("Loaded %d images of %d pixels", *features.shape)
    return Dataset.create(features, labels, 10, {"kind": "divide", "factor": PIXEL_SCALE})


class PcaModel(NamedTuple):
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self):
        return self.components.shape[0]

    def to_dict(self):
        return {
            "mean": [float_repr(v) for v in self.mean],
            "components": [[float_repr(v) for v in row] for row in self.components],
            "explained_variance": [float_repr(v) for v in self.explained_variance],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            np.array([float(v) for v in data["mean"]]),
            np.array([[float(v) for v in row] for row in data["components"]]),
            np.array([float(v) for v in data["explained_variance"]]),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def inverse_transform(self, projected):
        return np.asarray(projected) @ self.components + self.mean


def fit_pca(features, k) -> PcaModel:
    """Top-k principal directions from the covariance eigendecomposition.

    Each component is flipped so its largest-magnitude coordinate is positive.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    samples, width = features.shape
    if samples < 2:
        raise DomainError(f"PCA needs at least 2 samples, got {samples}")
    if not 1 <= k <= min(samples, width):
        raise DomainError(f"k = {k} is outside [1, {min(samples, width)}]")

    mean = features.mean(axis=0)
    centered = features - mean
    covariance = centered.T @ centered / (samples - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1][:k]
    components = eigenvectors[:, order].T
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    components = components * np.where(signs == 0, 1.0, signs)[:, None]
    return PcaModel(mean, components, np.clip(eigenvalues[order], 0.0, None))


def transform(model: PcaModel, features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != model.mean.size:
        raise DomainError(f"Expected {model.mean.size} features, got {features.shape[-1]}")
    return (features - model.mean) @ model.components.T


def synthetic_blobs(classes, per_class, dimension, separation, seed=0) -> Dataset:
    """Unit-covariance Gaussian blobs whose class centers sit ``separation`` apart.

    With dimension >= classes the centers form a regular simplex; otherwise
    they are spread on a circle with neighbouring centers ``separation`` apart.
    """
    if classes < 2 or per_class < 1 or dimension < 1:
        raise DomainError(f"Invalid blob parameters C={classes}, n={per_class}, F={dimension}")
    centers = np.zeros((classes, dimension))
    if dimension >= classes:
        centers[:, :classes] = separation / math.sqrt(2) * np.eye(classes)
    elif dimension >= 2:
        radius = separation / (2 * math.sin(math.pi / classes))
        angles = 2 * math.pi * np.arange(classes) / classes
        centers[:, 0], centers[:, 1] = radius * np.cos(angles), radius * np.sin(angles)
    else:
        centers[:, 0] = separation * np.arange(classes)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    labels = np.repeat(np.arange(classes), per_class)
    features = centers[labels] + rng.standard_normal((labels.size, dimension))
    return Dataset.create(features, labels, classes, {"kind": "none"})


def projected_frame(dataset: Dataset) -> pd.DataFrame:
    frame = pd.DataFrame(
        dataset.features, columns=[f"pc{i + 1}" for i in range(dataset.features.shape[1])]
    )
    frame.insert(0, "label", dataset.labels)
    return frame


def save_projected(dataset: Dataset, path, summary: Optional[Dict] = None) -> Path:
    return write_csv(projected_frame(dataset), path, summary=summary)


def load_projected(path, num_classes=None) -> Dataset:
    frame = read_csv(path)
    columns = [column for column in frame.columns if column.startswith("pc")]
    return Dataset.create(frame[columns].to_numpy(), frame["label"].to_numpy(), num_classes)
