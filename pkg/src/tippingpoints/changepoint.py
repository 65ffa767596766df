"""
Penalized changepoint detection for one-dimensional series.

Costs are twice the negative maximized normal log-likelihood of a segment:

* ``MeanNormal``      -- change in mean, variance fixed at the global MLE
* ``VarianceNormal``  -- change in variance, mean fixed at the global mean
* ``MeanVarNormal``   -- change in both

A segmentation minimizes ``sum(segment costs) + beta * n_changepoints``.
``optimal_partition`` solves this exactly in O(n^2); ``pelt`` returns the
identical solution while pruning candidates that can never be optimal
again; ``amoc`` tests for at most one change.

Ties (within a relative 1e-10 of the optimum) are broken toward fewer
changepoints, then toward the lexicographically earliest indices.

Indexing: ``Segmentation.changepoint_indices`` holds the *last* index of
every segment but the final one; ``Changepoint.index`` is the *first* index
of the new segment.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from numba import njit

__all__ = [
    "CostModel",
    "Penalty",
    "Segmentation",
    "Changepoint",
    "Model2Config",
    "segment_cost",
    "optimal_partition",
    "pelt",
    "amoc",
    "high_to_low_filter",
    "model2_predict",
    "exhaustive_search",
    "SegmentTooShort",
    "SeriesTooShort",
]

VAR_FLOOR = 1e-8
LOG_2PI = math.log(2.0 * math.pi)
TIE_RTOL = 1e-10

_PARAMS = {"MeanNormal": 1, "VarianceNormal": 1, "MeanVarNormal": 2}
CHANNELS = ("diameter", "momentum", "strain")


class SegmentTooShort(ValueError):
    pass


class SeriesTooShort(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    kind: str = "MeanVarNormal"

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise ValueError(f"unknown cost model {self.kind!r}; choose from {sorted(_PARAMS)}")

    @property
    def params_per_segment(self) -> int:
        return _PARAMS[self.kind]


@dataclass(frozen=True)
class Penalty:
    kind: str = "BIC"
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("BIC", "Manual"):
            raise ValueError(f"penalty kind must be 'BIC' or 'Manual', got {self.kind!r}")
        if self.kind == "Manual" and not (self.value is not None and self.value > 0):
            raise ValueError(f"manual penalty must be > 0, got {self.value!r}")

    @classmethod
    def parse(cls, text: str) -> "Penalty":
        if text.strip().upper() == "BIC":
            return cls("BIC")
        return cls("Manual", float(text))

    def resolve(self, n: int, model: CostModel) -> float:
        if self.kind == "Manual":
            return float(self.value)
        beta = (model.params_per_segment + 1) * math.log(n)
        if not beta > 0:
            raise SeriesTooShort(f"BIC penalty is not positive for n={n}")
        return beta

    def __str__(self):
        return "BIC" if self.kind == "BIC" else repr(float(self.value))


def _as_model(model) -> CostModel:
    return model if isinstance(model, CostModel) else CostModel(model)


def _as_penalty(penalty) -> Penalty:
    if isinstance(penalty, Penalty):
        return penalty
    if isinstance(penalty, str):
        return Penalty.parse(penalty)
    return Penalty("Manual", float(penalty))


@dataclass(frozen=True)
class Segmentation:
    changepoint_indices: Tuple[int, ...]
    segment_means: Tuple[float, ...]
    segment_variances: Tuple[float, ...]
    total_cost: float
    n: int = 0
    beta: float = 0.0
    model: str = "MeanVarNormal"

    @property
    def segments(self) -> List[Tuple[int, int]]:
        """Half-open ``(start, stop)`` bounds of every segment."""
        starts = [0] + [c + 1 for c in self.changepoint_indices]
        stops = [c + 1 for c in self.changepoint_indices] + [self.n]
        return list(zip(starts, stops))

    def __len__(self):
        return len(self.changepoint_indices)


@dataclass(frozen=True)
class Changepoint:
    index: int
    time_s: float
    channel: Optional[str]
    mean_before: float
    mean_after: float
    direction: str

    @property
    def drop(self) -> float:
        return self.mean_before - self.mean_after


# --------------------------------------------------------------- costs


def default_min_seg_len(model) -> int:
    # variance needs two points; a mean is defined on one
    return 1 if _as_model(model).kind == "MeanNormal" else 2


def segment_cost(series, i: int, j: int, model="MeanVarNormal", min_seg_len=None) -> float:
    """Cost of the closed segment ``series[i..j]`` evaluated directly."""
    model = _as_model(model)
    y = np.asarray(series, dtype=float)
    if min_seg_len is None:
        min_seg_len = default_min_seg_len(model)
    if not 0 <= i <= j < len(y):
        raise IndexError(f"segment [{i}, {j}] outside series of length {len(y)}")
    m = j - i + 1
    if m < min_seg_len:
        raise SegmentTooShort(f"segment of length {m} shorter than {min_seg_len}")
    seg = y[i : j + 1]
    if model.kind == "MeanNormal":
        sigma2 = max(float(np.mean((y - y.mean()) ** 2)), VAR_FLOOR)
        return float(np.sum((seg - seg.mean()) ** 2)) / sigma2
    if model.kind == "VarianceNormal":
        var = float(np.mean((seg - y.mean()) ** 2))
    else:
        var = float(np.mean((seg - seg.mean()) ** 2))
    return m * (LOG_2PI + math.log(max(var, VAR_FLOOR)) + 1.0)


_KIND_CODE = {"MeanNormal": 0, "VarianceNormal": 1, "MeanVarNormal": 2}


@njit(cache=True)
def _prefix_cost(s1, s2, sigma2, kind, a, b):
    """Cost of the half-open segment ``[a, b)`` from cumulative sums."""
    m = b - a
    t1 = s1[b] - s1[a]
    t2 = s2[b] - s2[a]
    if kind == 1:
        var = t2 / m
    else:
        rss = t2 - t1 * t1 / m
        if rss < 0.0:
            rss = 0.0
        if kind == 0:
            return rss / sigma2
        var = rss / m
    if var < VAR_FLOOR:
        var = VAR_FLOOR
    return m * (LOG_2PI + math.log(var) + 1.0)


@njit(cache=True)
def _starts_of(back, a, out):
    """Write the segment starts of the path whose last start is ``a`` into
    ``out`` (ascending) and return how many there are."""
    k = 0
    b = a
    while b > 0:
        out[k] = b
        k += 1
        b = back[b]
    out[:k] = out[:k][::-1].copy()
    return k


@njit(cache=True)
def _precedes(back, count, a, c, buf_a, buf_c):
    """True if the path through last start ``a`` beats the one through ``c``
    on (number of changepoints, lexicographic starts)."""
    if count[a] != count[c]:
        return count[a] < count[c]
    ka = _starts_of(back, a, buf_a)
    _starts_of(back, c, buf_c)
    for i in range(ka):
        if buf_a[i] != buf_c[i]:
            return buf_a[i] < buf_c[i]
    return False


@njit(cache=True)
def _solve_kernel(s1, s2, sigma2, kind, beta, min_seg_len, prune, rtol):
    n = s1.shape[0] - 1
    F = np.full(n + 1, np.inf)
    F[0] = -beta
    back = np.zeros(n + 1, dtype=np.int64)
    count = np.zeros(n + 1, dtype=np.int64)  # changepoints on the path ending at b
    never = n + min_seg_len + 1
    # candidate starts (sorted) and the step at which each stops being usable
    cand = np.empty(n + 1, dtype=np.int64)
    kill = np.empty(n + 1, dtype=np.int64)
    seg = np.empty(n + 1)
    buf_a = np.empty(n + 1, dtype=np.int64)
    buf_c = np.empty(n + 1, dtype=np.int64)
    cand[0] = 0
    kill[0] = never
    size = 1
    next_kill = never

    for b in range(min_seg_len, n + 1):
        if next_kill <= b:
            m = 0
            next_kill = never
            for i in range(size):
                if kill[i] > b:
                    cand[m] = cand[i]
                    kill[m] = kill[i]
                    if kill[m] < next_kill:
                        next_kill = kill[m]
                    m += 1
            size = m
        k = 0
        best = np.inf
        while k < size and b - cand[k] >= min_seg_len:
            a = cand[k]
            seg[k] = F[a] + _prefix_cost(s1, s2, sigma2, kind, a, b)
            if seg[k] < best:
                best = seg[k]
            k += 1
        tol = rtol * max(1.0, abs(best + beta))
        pick = -1
        for i in range(k):
            if seg[i] <= best + tol:
                a = cand[i]
                if pick < 0:
                    pick = a
                else:
                    # paths through start 0 carry no changepoint
                    ca = count[a] + (1 if a > 0 else 0)
                    cp = count[pick] + (1 if pick > 0 else 0)
                    if ca < cp or (ca == cp and a > 0 and pick > 0
                                   and _precedes(back, count, a, pick, buf_a, buf_c)):
                        pick = a
        for i in range(k):
            if cand[i] == pick:
                F[b] = seg[i] + beta
        back[b] = pick
        count[b] = count[pick] + (1 if pick > 0 else 0)
        if prune:
            # K = 0; a start pruned at b stays usable until a split at b is legal
            limit = F[b] + tol
            for i in range(k):
                if seg[i] > limit and kill[i] == never:
                    kill[i] = b + min_seg_len
                    if kill[i] < next_kill:
                        next_kill = kill[i]
        cand[size] = b
        kill[size] = never
        size += 1
    return back


def _path(back, b):
    """Segment starts (excluding 0) of the optimal path ending at ``b``."""
    out = []
    while b > 0:
        b = int(back[b])
        if b > 0:
            out.append(b)
    return out[::-1]


def _solve(y, model, beta, min_seg_len, prune):
    yc = y - y.mean()
    s1 = np.concatenate(([0.0], np.cumsum(yc)))
    s2 = np.concatenate(([0.0], np.cumsum(yc * yc)))
    sigma2 = max(float(np.mean(yc * yc)), VAR_FLOOR)
    back = _solve_kernel(
        s1, s2, sigma2, _KIND_CODE[model.kind], float(beta), int(min_seg_len), bool(prune), TIE_RTOL
    )
    return _path(back, len(y))


def _check(series, model, penalty, min_seg_len):
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    model = _as_model(model)
    if min_seg_len is None:
        min_seg_len = 2
    if min_seg_len < 1:
        raise ValueError(f"min_seg_len must be >= 1, got {min_seg_len}")
    if model.kind != "MeanNormal" and min_seg_len < 2:
        raise ValueError(f"{model.kind} needs min_seg_len >= 2")
    if len(y) < min_seg_len:
        raise SeriesTooShort(f"series of length {len(y)} shorter than min_seg_len={min_seg_len}")
    beta = _as_penalty(penalty).resolve(len(y), model)
    return y, model, beta, min_seg_len


def _segmentation(y, starts, model, beta, min_seg_len) -> Segmentation:
    bounds = [0] + list(starts) + [len(y)]
    means, variances, total = [], [], 0.0
    for a, b in zip(bounds, bounds[1:]):
        seg = y[a:b]
        means.append(float(seg.mean()))
        variances.append(float(seg.var()))
        total += segment_cost(y, a, b - 1, model, min_seg_len)
    total += beta * len(starts)
    return Segmentation(
        changepoint_indices=tuple(s - 1 for s in starts),
        segment_means=tuple(means),
        segment_variances=tuple(variances),
        total_cost=total,
        n=len(y),
        beta=beta,
        model=model.kind,
    )


def optimal_partition(series, model="MeanVarNormal", penalty="BIC", min_seg_len=2) -> Segmentation:
    """Exact penalized segmentation by dynamic programming over all last changepoints."""
    y, model, beta, min_seg_len = _check(series, model, penalty, min_seg_len)
    return _segmentation(y, _solve(y, model, beta, min_seg_len, prune=False), model, beta, min_seg_len)


def pelt(series, model="MeanVarNormal", penalty="BIC", min_seg_len=2) -> Segmentation:
    """Same optimum as :func:`optimal_partition`, with PELT candidate pruning."""
    y, model, beta, min_seg_len = _check(series, model, penalty, min_seg_len)
    return _segmentation(y, _solve(y, model, beta, min_seg_len, prune=True), model, beta, min_seg_len)


def _compositions(n, min_len, start=0):
    if n - start < min_len:
        return
    yield []
    for cut in range(start + min_len, n - min_len + 1):
        for rest in _compositions(n, min_len, cut):
            yield [cut] + rest


def exhaustive_search(series, model="MeanVarNormal", penalty="BIC", min_seg_len=2) -> Segmentation:
    """Brute force over every admissible segmentation. Only for short series."""
    y, model, beta, min_seg_len = _check(series, model, penalty, min_seg_len)
    n = len(y)
    table = {}

    def c(a, b):
        if (a, b) not in table:
            table[a, b] = segment_cost(y, a, b - 1, model, min_seg_len)
        return table[a, b]

    scored = []
    for starts in _compositions(n, min_len=min_seg_len):
        bounds = [0] + starts + [n]
        total = sum(c(a, b) for a, b in zip(bounds, bounds[1:])) + beta * len(starts)
        scored.append((total, starts))
    best = min(t for t, _ in scored)
    tol = TIE_RTOL * max(1.0, abs(best))
    _, starts = min(((len(s), s) for t, s in scored if t <= best + tol))
    return _segmentation(y, starts, model, beta, min_seg_len)


def _time_lookup(time_map):
    if time_map is None:
        return float
    if callable(time_map):
        return time_map
    return lambda i: float(time_map[i])


def amoc(
    series,
    model="MeanVarNormal",
    penalty="BIC",
    min_seg_len=2,
    time_map=None,
    channel=None,
) -> Optional[Changepoint]:
    """At most one change: the best single split, kept only if it lowers the
    cost by strictly more than the penalty."""
    y, model, beta, min_seg_len = _check(series, model, penalty, min_seg_len)
    n = len(y)
    if n < 2 * min_seg_len:
        raise SeriesTooShort(f"AMOC needs at least {2 * min_seg_len} samples, got {n}")
    tau = _amoc_split(y, model, beta, min_seg_len)
    if tau is None:
        return None
    before, after = float(y[:tau].mean()), float(y[tau:].mean())
    return Changepoint(
        index=tau,
        time_s=_time_lookup(time_map)(tau),
        channel=channel,
        mean_before=before,
        mean_after=after,
        direction="high_to_low" if before > after else "low_to_high",
    )


def _amoc_split(y, model, beta, min_seg_len):
    n = len(y)
    full = segment_cost(y, 0, n - 1, model, min_seg_len)
    best, best_tau = math.inf, None
    for tau in range(min_seg_len, n - min_seg_len + 1):
        c = segment_cost(y, 0, tau - 1, model, min_seg_len) + segment_cost(
            y, tau, n - 1, model, min_seg_len
        )
        if c < best:
            best, best_tau = c, tau
    if full - best > beta:
        return best_tau
    return None


def high_to_low_filter(
    seg: Segmentation,
    series,
    min_buildup: int = 4,
    time_map=None,
    channel: Optional[str] = None,
) -> List[Changepoint]:
    """Boundaries where the segment mean drops after a build-up of at least
    ``min_buildup`` samples."""
    y = np.asarray(series, dtype=float)
    lookup = _time_lookup(time_map)
    if seg.n != len(y):
        raise ValueError(f"segmentation covers {seg.n} samples, series has {len(y)}")
    segments = seg.segments
    out = []
    for (a, b), (_, c) in zip(segments, segments[1:]):
        before, after = float(y[a:b].mean()), float(y[b:c].mean())
        if before > after and b - a >= min_buildup:
            out.append(Changepoint(b, lookup(b), channel, before, after, "high_to_low"))
    return out


@dataclass(frozen=True)
class Model2Config:
    cost: str = "MeanVarNormal"
    penalty: Union[Penalty, str, float] = "BIC"
    min_seg_len: int = 2
    min_buildup: int = 4
    method: str = "pelt"  # or "amoc"
    channels: Tuple[str, ...] = CHANNELS


def segment_channel(series, config: Model2Config) -> Segmentation:
    if config.method == "pelt":
        return pelt(series, config.cost, config.penalty, config.min_seg_len)
    if config.method == "amoc":
        y, model, beta, min_len = _check(series, config.cost, config.penalty, config.min_seg_len)
        tau = _amoc_split(y, model, beta, min_len) if len(y) >= 2 * min_len else None
        return _segmentation(y, [] if tau is None else [tau], model, beta, min_len)
    raise ValueError(f"unknown method {config.method!r}")


def model2_predict(tension, config: Model2Config = Model2Config()) -> List[Changepoint]:
    """High-to-low changepoints in each tension channel, merged by time."""
    times = list(tension.window_times)
    if not times:
        raise SeriesTooShort("tension series is empty")
    out = []
    for channel in config.channels:
        series = np.asarray(getattr(tension, channel), dtype=float)
        seg = segment_channel(series, config)
        out.extend(high_to_low_filter(seg, series, config.min_buildup, times, channel))
    order = {c: i for i, c in enumerate(CHANNELS)}
    out.sort(key=lambda cp: (cp.time_s, order.get(cp.channel, 99), cp.index))
    return out
