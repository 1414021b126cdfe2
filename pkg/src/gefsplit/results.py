"""Result records shared by the estimators and the CLI."""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


@dataclass
class EstimatorResult:
    """Monte Carlo estimate with its standard error and an optional target."""

    name: str
    estimate: float
    stderr: float
    n_samples: int
    seed: Optional[int] = None
    target: Optional[float] = None
    target_source: Optional[str] = None
    tolerance: Optional[float] = None
    passed: Optional[bool] = None
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def judge(self, tolerance):
        """Set ``passed`` from |estimate - target| <= tolerance."""
        self.tolerance = float(tolerance)
        if self.target is not None:
            self.passed = bool(abs(self.estimate - self.target) <= tolerance)
        return self.passed

    def to_record(self):
        rec = asdict(self)
        return {k: _plain(v) for k, v in rec.items()}


def _plain(v):
    """Convert numpy scalars/arrays and non-finite floats into JSON-friendly values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        return [_plain(v.real), _plain(v.imag)]
    return v


def mean_and_stderr(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return m, se


def jackknife(stat, data, blocks=50):
    """Delete-one-block jackknife of ``stat`` over the leading axis.

    Returns (full-sample value, jackknife standard error).
    """
    data = np.asarray(data)
    n = data.shape[0]
    blocks = min(blocks, n)
    edges = np.linspace(0, n, blocks + 1).astype(int)
    full = stat(data)
    reps = []
    for b in range(blocks):
        keep = np.concatenate([data[: edges[b]], data[edges[b + 1] :]])
        reps.append(stat(keep))
    reps = np.asarray(reps)
    se = np.sqrt((blocks - 1) / blocks * np.sum((reps - reps.mean(axis=0)) ** 2, axis=0))
    return full, se
