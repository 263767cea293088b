"""Dataset difficulty score from class-level neighbor confusion.

Pipeline, given labeled feature vectors:

1. For each class, sample up to samples_per_class member points (seeded,
   order-independent) and find each point's k nearest neighbors over the
   whole set by Euclidean distance, excluding the point itself. Distance
   ties break toward the smaller point index. Row c of the similarity
   matrix S is the average fraction of those neighbors voting for each
   class, renormalized to sum to 1.
2. Affinity between classes i and j is one minus the Bray-Curtis
   distance between rows i and j of S; the diagonal is zeroed.
3. The score is the total positive drift of the running maximum of the
   graph-Laplacian eigenvalues taken in ascending order, which equals
   the spectrum's spread (largest minus smallest eigenvalue).

Identical class rows give affinity 1; fully separable data gives S = I,
an affinity of 0 everywhere, and a score of exactly 0.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import _rand
from .errors import InputError, NumericError

_LAPLACIANS = ("unnormalized", "symmetric-normalized")

# Binary container layout (all little-endian):
#   8s   magic
#   I    container version
#   I    flags (reserved, 0)
#   Q    n_rows
#   Q    n_cols
#   n_rows * q           labels
#   n_rows * n_cols * d  features, row-major
_MAGIC = b"TDLFSET1"
_HEADER = struct.Struct("<8sII")
_SHAPE = struct.Struct("<QQ")
_BINARY_VERSION = 1


@dataclass(frozen=True)
class CsgConfig:
    k: int = 3
    samples_per_class: int = 100
    seed: int = 0
    laplacian: str = "unnormalized"

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise InputError(f"k must be an int >= 1, got {self.k!r}")
        spc = self.samples_per_class
        if not isinstance(spc, int) or isinstance(spc, bool) or spc < 1:
            raise InputError(f"samples_per_class must be an int >= 1, got {spc!r}")
        if self.laplacian not in _LAPLACIANS:
            raise InputError(
                f"laplacian must be one of {', '.join(_LAPLACIANS)}, "
                f"got {self.laplacian!r}"
            )

    def to_document(self) -> dict:
        return {"k": self.k, "samples_per_class": self.samples_per_class,
                "seed": self.seed, "laplacian": self.laplacian}


@dataclass(frozen=True)
class LabeledFeatureSet:
    """Feature matrix (n, d) with integer class labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InputError(
                f"features must be a non-empty 2-D matrix, got shape {feats.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise InputError("features must be finite")
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise InputError(
                f"labels must be a vector of length {feats.shape[0]}, "
                f"got shape {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64, copy=True)
            if not np.array_equal(as_int, labels):
                raise InputError("labels must be integers")
            labels = as_int
        else:
            labels = labels.astype(np.int64, copy=False)
        if labels.min() < 0:
            raise InputError("labels must be >= 0")
        n_classes = int(labels.max()) + 1
        if n_classes < 2:
            raise InputError("need at least 2 classes")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class CsgResult:
    csg: float
    similarity: np.ndarray
    eigenvalues: np.ndarray


def _sampled_indices(data: LabeledFeatureSet, cfg: CsgConfig) -> list[np.ndarray]:
    """Per-class sampled point indices, sorted ascending.

    One global permutation drives the sampling, so relabeling classes
    permutes the selection along with them and the result is independent
    of class order. With samples_per_class >= the class size the whole
    class is taken and the seed is irrelevant.
    """
    n = data.features.shape[0]
    rank = np.empty(n, dtype=np.int64)
    rank[_rand.spawn_rng(_rand.norm_seed(cfg.seed)).permutation(n)] = np.arange(n)
    picks = []
    for c in range(data.n_classes):
        members = np.flatnonzero(data.labels == c)
        if members.size <= cfg.samples_per_class:
            picks.append(members)
            continue
        chosen = members[np.argsort(rank[members], kind="stable")]
        picks.append(np.sort(chosen[: cfg.samples_per_class]))
    return picks


def class_similarity(data: LabeledFeatureSet, cfg: CsgConfig = CsgConfig(),
                     threads: int = 1) -> np.ndarray:
    """Neighbor-vote similarity matrix S, one row per class, rows sum to 1."""
    counts = data.class_counts()
    too_small = np.flatnonzero(counts < cfg.k + 1)
    if too_small.size:
        c = int(too_small[0])
        raise InputError(
            f"class {c} has {int(counts[c])} samples; "
            f"k={cfg.k} needs at least {cfg.k + 1} per class"
        )
    picks = _sampled_indices(data, cfg)
    feats, labels = data.features, data.labels
    n_classes = data.n_classes

    def vote_row(c: int) -> np.ndarray:
        idx = picks[c]
        dists = cdist(feats[idx], feats)
        dists[np.arange(idx.size), idx] = np.inf
        # Stable argsort breaks distance ties toward the smaller index.
        neighbors = np.argsort(dists, axis=1, kind="stable")[:, : cfg.k]
        votes = np.zeros((idx.size, n_classes))
        np.add.at(votes, (np.arange(idx.size)[:, None], labels[neighbors]), 1.0)
        row = (votes / cfg.k).mean(axis=0)
        return row / _sorted_sum(row)

    rows = _rand.run_sharded(vote_row, list(range(n_classes)), threads)
    return np.vstack(rows)


def _check_similarity(sim) -> np.ndarray:
    arr = np.asarray(sim, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"similarity must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise InputError("similarity needs at least 2 classes")
    if not np.all(np.isfinite(arr)):
        raise InputError("similarity must be finite")
    if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
        raise InputError("similarity entries must lie in [0, 1]")
    sums = arr.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise InputError("similarity rows must sum to 1 within 1e-9")
    return arr


def _sorted_sum(values: np.ndarray, axis: int = -1) -> np.ndarray:
    # Summing in sorted order makes the result depend only on the value
    # multiset, so relabeling classes cannot move a single bit.
    return np.sort(values, axis=axis).sum(axis=axis)


def class_affinity(sim) -> np.ndarray:
    """1 - BrayCurtis(rows of S), diagonal zeroed.

    Bray-Curtis between rows u, v is sum|u-v| / sum(u+v). Both sums run
    in sorted order (see _sorted_sum), keeping the matrix bit-identical
    under class relabeling.
    """
    arr = _check_similarity(sim)
    n = arr.shape[0]
    affinity = np.empty((n, n))
    for i in range(n):
        diff = _sorted_sum(np.abs(arr[i][None, :] - arr))
        tot = _sorted_sum(arr[i][None, :] + arr)
        affinity[i] = 1.0 - np.where(tot > 0, diff / np.where(tot > 0, tot, 1.0), 0.0)
    np.fill_diagonal(affinity, 0.0)
    return np.clip(affinity, 0.0, 1.0)


def _laplacian(affinity: np.ndarray, kind: str) -> np.ndarray:
    degree = _sorted_sum(affinity, axis=1)
    if kind == "unnormalized":
        return np.diag(degree) - affinity
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.where(degree > 0, degree, 1.0)), 0.0)
    lap = -affinity * inv_sqrt[:, None] * inv_sqrt[None, :]
    np.fill_diagonal(lap, np.where(degree > 0, 1.0, 0.0))
    return lap


def laplacian_spectrum(sim, cfg: CsgConfig = CsgConfig()) -> np.ndarray:
    """Ascending, residual-checked eigenvalues of the affinity Laplacian.

    Classes are put in a canonical order (lexicographic by sorted
    affinity row) before the decomposition, so the computed spectrum is
    exactly invariant under class relabeling, not merely up to rounding.
    """
    affinity = class_affinity(sim)
    order = np.lexsort(np.sort(affinity, axis=1).T[::-1])
    lap = _laplacian(affinity[np.ix_(order, order)], cfg.laplacian)
    try:
        evals, evecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"eigendecomposition failed on a {lap.shape[0]}x{lap.shape[0]} "
            f"Laplacian (max |entry| {np.abs(lap).max():.3e}): {exc}"
        ) from exc
    # Residual check: ||L v - lambda v|| <= 1e-10 * max(1, ||L||_2) per vector.
    residual = np.linalg.norm(lap @ evecs - evecs * evals, axis=0).max()
    scale = max(1.0, float(np.abs(evals).max()))
    if residual > 1e-10 * scale:
        raise NumericError(
            f"eigendecomposition residual {residual:.3e} exceeds tolerance "
            f"for a spectrum spanning [{evals.min():.3e}, {evals.max():.3e}]"
        )
    return evals


def _spectral_spread(evals: np.ndarray) -> float:
    running_max = np.maximum.accumulate(evals)
    diffs = np.diff(running_max)
    return float(diffs[diffs > 0].sum())


def csg_score(sim, cfg: CsgConfig = CsgConfig()) -> float:
    """Difficulty score of a similarity matrix (Laplacian spectral spread)."""
    return _spectral_spread(laplacian_spectrum(sim, cfg))


def compute_csg(data: LabeledFeatureSet, cfg: CsgConfig = CsgConfig(),
                threads: int = 1) -> CsgResult:
    """Full pipeline: similarity, Laplacian spectrum, difficulty score."""
    sim = class_similarity(data, cfg, threads=threads)
    evals = laplacian_spectrum(sim, cfg)
    return CsgResult(csg=_spectral_spread(evals), similarity=sim,
                     eigenvalues=evals)


def csg_result_to_document(result: CsgResult, cfg: CsgConfig) -> dict:
    return {
        "csg": float(result.csg),
        "config": cfg.to_document(),
        "similarity": [[float(v) for v in row] for row in result.similarity],
        "eigenvalues": [float(v) for v in result.eigenvalues],
    }


def save_labeled_features_text(path: str, data: LabeledFeatureSet) -> None:
    """One point per line: integer label, then the feature values."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(data.labels, data.features):
            fields = [str(int(label))] + [repr(float(v)) for v in row]
            fh.write(" ".join(fields) + "\n")


def _parse_features_text(text: str, path: str) -> LabeledFeatureSet:
    labels: list[int] = []
    rows: list[list[float]] = []
    width = None
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        if width is None:
            width = len(fields)
            if width < 2:
                raise InputError(
                    f"{path}: line {n}: need a label plus at least one feature"
                )
        elif len(fields) != width:
            raise InputError(
                f"{path}: line {n}: {len(fields)} fields, expected {width}"
            )
        try:
            label = int(fields[0])
            rows.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise InputError(f"{path}: line {n}: {exc}") from None
        labels.append(label)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return LabeledFeatureSet(features=np.array(rows, dtype=float),
                             labels=np.array(labels, dtype=np.int64))


def save_labeled_features_binary(path: str, data: LabeledFeatureSet) -> None:
    n, d = data.features.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _BINARY_VERSION, 0))
        fh.write(_SHAPE.pack(n, d))
        fh.write(data.labels.astype("<i8").tobytes())
        fh.write(np.ascontiguousarray(data.features, dtype="<f8").tobytes())


def _parse_features_binary(blob: bytes, path: str) -> LabeledFeatureSet:
    if len(blob) < _HEADER.size + _SHAPE.size:
        raise InputError(f"{path}: truncated container header")
    magic, version, flags = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != _BINARY_VERSION:
        raise InputError(f"{path}: unsupported container version {version}")
    if flags != 0:
        raise InputError(f"{path}: unsupported container flags {flags:#x}")
    n, d = _SHAPE.unpack_from(blob, _HEADER.size)
    offset = _HEADER.size + _SHAPE.size
    expected = offset + 8 * n + 8 * n * d
    if len(blob) != expected:
        raise InputError(
            f"{path}: container payload is {len(blob) - offset} bytes, "
            f"expected {expected - offset} for {n} rows x {d} features"
        )
    labels = np.frombuffer(blob, dtype="<i8", count=n, offset=offset)
    feats = np.frombuffer(blob, dtype="<f8", count=n * d, offset=offset + 8 * n)
    return LabeledFeatureSet(features=feats.reshape(n, d).copy(),
                             labels=labels.copy())


def load_labeled_features(path: str) -> LabeledFeatureSet:
    """Load a labeled feature set, auto-detecting binary vs text layout."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob.startswith(_MAGIC):
        return _parse_features_binary(blob, path)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: neither a known container nor text: {exc}") from None
    return _parse_features_text(text, path)
