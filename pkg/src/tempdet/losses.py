"""Tempered softmax, cross-entropy and their interaction with temperature.

Temperature divides the logits before the softmax. All probability math
is float64; the softmax subtracts the row maximum before exponentiating
so arbitrarily large logits stay finite.
"""
from __future__ import annotations

import numpy as np

from . import _rand
from .errors import InputError
from .tables import Table

# ln arguments are clamped here inside cross-entropy; entries that are
# exactly zero where the target is positive short-circuit to inf instead.
_LOG_FLOOR = 1e-300

_DIST_TOL = 1e-12


def _as_logits(logits, name: str = "logits") -> np.ndarray:
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < 1:
        raise InputError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    return arr


def _check_temperature(temperature: float) -> float:
    temperature = float(temperature)
    if not np.isfinite(temperature) or temperature <= 0:
        raise InputError(f"temperature must be finite and > 0, got {temperature}")
    return temperature


def _softmax_rows(scaled: np.ndarray) -> np.ndarray:
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def tempered_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """softmax(logits / temperature) with max-subtraction stabilization."""
    arr = _as_logits(logits)
    temperature = _check_temperature(temperature)
    return _softmax_rows(arr[None, :] / temperature)[0]


def shannon_entropy(probs) -> float:
    """Entropy in nats of a probability vector; 0 log 0 counts as 0."""
    arr = np.asarray(probs, dtype=float)
    positive = arr[arr > 0]
    return float(-(positive * np.log(positive)).sum())


def _check_distribution_rows(arr: np.ndarray, name: str) -> None:
    if np.any(arr < 0):
        raise InputError(f"{name} entries must be >= 0")
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _DIST_TOL):
        worst = float(np.abs(sums - 1.0).max())
        raise InputError(
            f"{name} rows must sum to 1 within {_DIST_TOL:g} "
            f"(worst deviation {worst:.3e})"
        )


def _as_distribution(values, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
        was_1d = True
    elif arr.ndim == 2:
        was_1d = False
    else:
        raise InputError(f"{name} must be 1- or 2-dimensional, got shape {arr.shape}")
    if arr.shape[-1] < 1 or arr.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    _check_distribution_rows(arr, name)
    return arr, was_1d


def cross_entropy(pred, target) -> float:
    """Cross-entropy -sum(target * ln pred), averaged over rows for 2-D input.

    A prediction of exactly zero probability where the target is positive
    yields inf rather than an exception.
    """
    p, p_1d = _as_distribution(pred, "pred")
    t, t_1d = _as_distribution(target, "target")
    if p.shape != t.shape or p_1d != t_1d:
        raise InputError(
            f"pred and target shapes must match, got {np.shape(pred)} "
            f"and {np.shape(target)}"
        )
    if np.any((p == 0.0) & (t > 0.0)):
        return float("inf")
    logp = np.log(np.maximum(p, _LOG_FLOOR))
    losses = -(t * logp).sum(axis=1)
    return float(losses.mean())


def one_hot(n_classes: int, true_class: int) -> np.ndarray:
    if n_classes < 1:
        raise InputError(f"n_classes must be >= 1, got {n_classes}")
    if not 0 <= true_class < n_classes:
        raise InputError(
            f"true_class must be in [0, {n_classes}), got {true_class}"
        )
    vec = np.zeros(n_classes, dtype=float)
    vec[true_class] = 1.0
    return vec


def smooth_labels(onehot, eps: float) -> np.ndarray:
    """Label smoothing y * (1 - eps) + eps / C for a one-hot vector."""
    arr = np.asarray(onehot, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise InputError("onehot must be a non-empty vector")
    hits = np.flatnonzero(arr == 1.0)
    if len(hits) != 1 or arr.sum() != 1.0 or np.any((arr != 0.0) & (arr != 1.0)):
        raise InputError("onehot must contain a single 1 and zeros elsewhere")
    eps = float(eps)
    if not 0.0 <= eps < 1.0:
        raise InputError(f"eps must lie in [0, 1), got {eps}")
    n = arr.size
    return arr * (1.0 - eps) + eps / n


def ce_softmax_gradient(logits, true_class: int,
                        temperature: float = 1.0) -> np.ndarray:
    """Gradient of CE(tempered_softmax(z), one_hot) with respect to z.

    Analytically (p - y) / T where p is the tempered softmax output.
    """
    arr = _as_logits(logits)
    temperature = _check_temperature(temperature)
    probs = tempered_softmax(arr, temperature)
    return (probs - one_hot(arr.size, int(true_class))) / temperature


def loss_response_curve(sweep, others=(), temperature: float = 1.0,
                        eps: float = 0.0) -> Table:
    """Loss as one logit sweeps while the remaining logits stay fixed.

    The swept logit belongs to the true class; `others` holds the fixed
    logits of the remaining classes (typically zeros). Returns a table
    with columns (swept_logit, loss).
    """
    sweep_arr = np.asarray(sweep, dtype=float)
    if sweep_arr.ndim != 1 or sweep_arr.size < 1:
        raise InputError("sweep must be a non-empty vector of logit values")
    if not np.all(np.isfinite(sweep_arr)):
        raise InputError("sweep must be finite")
    others_arr = np.asarray(others, dtype=float)
    if others_arr.ndim != 1:
        raise InputError("others must be a vector")
    if others_arr.size and not np.all(np.isfinite(others_arr)):
        raise InputError("others must be finite")
    temperature = _check_temperature(temperature)
    n_classes = 1 + others_arr.size
    target = smooth_labels(one_hot(n_classes, 0), eps)
    rows = []
    for value in sweep_arr:
        logits = np.concatenate(([value], others_arr))
        probs = tempered_softmax(logits, temperature)
        rows.append((float(value), cross_entropy(probs, target)))
    return Table(columns=("swept_logit", "loss"), rows=tuple(rows))


def max_prob_simulation(class_counts, trials: int, temperature: float = 1.0,
                        seed: int = 0, threads: int = 1) -> Table:
    """Monte Carlo of tempered softmax outputs on standard normal logits.

    For each class count C draws `trials` logit vectors z ~ N(0, I_C),
    applies the tempered softmax and summarizes the maximum output
    probability (mean and quantiles) plus the mean output probability of
    a fixed class, which should sit near 1/C by exchangeability.
    """
    counts = [int(c) for c in np.atleast_1d(class_counts)]
    if not counts:
        raise InputError("class_counts must be non-empty")
    for c in counts:
        if c < 1:
            raise InputError(f"class counts must be >= 1, got {c}")
    trials = int(trials)
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    temperature = _check_temperature(temperature)
    base = _rand.norm_seed(seed)

    def run_shard(spec: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray]:
        n_classes, index, rows = spec
        rng = _rand.spawn_rng(base, n_classes, index)
        logits = rng.standard_normal((rows, n_classes))
        probs = _softmax_rows(logits / temperature)
        return probs.max(axis=1), probs[:, 0].copy()

    out_rows = []
    for n_classes in counts:
        sizes = _rand.shard_counts(trials, _rand.rows_per_shard(n_classes))
        shards = [(n_classes, i, rows) for i, rows in enumerate(sizes)]
        parts = _rand.run_sharded(run_shard, shards, threads)
        max_probs = np.concatenate([p[0] for p in parts])
        first_probs = np.concatenate([p[1] for p in parts])
        q = np.quantile(max_probs, (0.05, 0.25, 0.5, 0.75, 0.95))
        if trials > 1:
            stderr = float(first_probs.std(ddof=1) / np.sqrt(trials))
        else:
            stderr = 0.0
        out_rows.append((
            float(n_classes), float(max_probs.mean()),
            float(q[0]), float(q[1]), float(q[2]), float(q[3]), float(q[4]),
            float(first_probs.mean()), stderr,
        ))
    return Table(
        columns=("classes", "mean_max_prob", "q05", "q25", "q50", "q75", "q95",
                 "mean_class0_prob", "stderr_class0_prob"),
        rows=tuple(out_rows),
    )
