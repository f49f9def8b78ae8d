"""Engine-data ingestion: 26-column run-to-failure text files in, labeled
fixed-length training windows out.

Record layout follows the turbofan degradation file convention: one cycle per
line, whitespace-separated fields `unit cycle setting1..3 sensor1..21`. RUL
labels use the piecewise-linear rule min(cap, failure_cycle - cycle).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

N_SETTINGS = 3
N_SENSORS = 21
N_FEATURES = N_SETTINGS + N_SENSORS
N_COLUMNS = 2 + N_FEATURES

DEFAULT_RUL_CAP = 125.0
DEFAULT_WINDOW_LEN = 30


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class CycleRecord:
    unit_id: int
    cycle: int
    op_settings: Tuple[float, ...]
    sensors: Tuple[float, ...]

    def __post_init__(self):
        if len(self.op_settings) != N_SETTINGS:
            raise ValueError(f"expected {N_SETTINGS} settings, got {len(self.op_settings)}")
        if len(self.sensors) != N_SENSORS:
            raise ValueError(f"expected {N_SENSORS} sensors, got {len(self.sensors)}")
        if self.cycle < 1:
            raise ValueError(f"cycle must be >= 1, got {self.cycle}")


@dataclass
class UnitSeries:
    unit_id: int
    records: List[CycleRecord]
    failure_cycle: int

    def feature_matrix(self) -> np.ndarray:
        """All 24 raw feature columns (settings then sensors), one row per cycle."""
        return np.array(
            [list(r.op_settings) + list(r.sensors) for r in self.records], dtype=np.float64
        )


@dataclass
class RulWindow:
    inputs: np.ndarray  # [window_len x feature_dim], normalized
    target_rul: float
    unit_id: int
    end_cycle: int
    padded: bool = False


@dataclass
class NormStats:
    mean: np.ndarray  # per retained feature
    std: np.ndarray
    dropped: List[int]  # original column indices with zero variance
    n_features_in: int = N_FEATURES

    @property
    def retained(self) -> List[int]:
        return [i for i in range(self.n_features_in) if i not in set(self.dropped)]


def parse_cmapss(source: Union[str, Iterable[str]]) -> List[UnitSeries]:
    """Parse run-to-failure text into per-unit series.

    Accepts a string or an iterable of lines. Blank lines are skipped. Records
    are grouped by unit and sorted by cycle; within a unit, cycles must be
    consecutive starting at 1.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    by_unit: dict[int, List[CycleRecord]] = {}
    last_cycle: dict[int, int] = {}
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        fields = stripped.split()
        if len(fields) != N_COLUMNS:
            raise ParseError(line_no, f"expected {N_COLUMNS} fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(line_no, f"non-numeric field: {exc}") from None
        unit_id, cycle = int(values[0]), int(values[1])
        if unit_id < 1:
            raise ParseError(line_no, f"unit id must be >= 1, got {unit_id}")
        expected = last_cycle.get(unit_id, 0) + 1
        if cycle != expected:
            raise ParseError(
                line_no, f"unit {unit_id}: expected cycle {expected}, got {cycle}"
            )
        last_cycle[unit_id] = cycle
        record = CycleRecord(
            unit_id=unit_id,
            cycle=cycle,
            op_settings=tuple(values[2 : 2 + N_SETTINGS]),
            sensors=tuple(values[2 + N_SETTINGS :]),
        )
        by_unit.setdefault(unit_id, []).append(record)
    return [
        UnitSeries(unit_id=uid, records=recs, failure_cycle=recs[-1].cycle)
        for uid, recs in sorted(by_unit.items())
    ]


def serialize_cmapss(units: Sequence[UnitSeries]) -> str:
    """Inverse of parse_cmapss: emit the 26-column text layout."""
    out = []
    for unit in units:
        for r in unit.records:
            fields = [str(r.unit_id), str(r.cycle)]
            fields += [format(v, ".17g") for v in r.op_settings]
            fields += [format(v, ".17g") for v in r.sensors]
            out.append(" ".join(fields))
    return "\n".join(out) + ("\n" if out else "")


def label_rul(series: UnitSeries, rul_cap: float) -> List[Tuple[int, float]]:
    """Piecewise-linear labels: rul(t) = min(cap, failure_cycle - t)."""
    if rul_cap <= 0:
        raise ValueError(f"rul_cap must be positive, got {rul_cap}")
    T = series.failure_cycle
    return [(r.cycle, min(float(rul_cap), float(T - r.cycle))) for r in series.records]


def fit_normalizer(train_units: Sequence[UnitSeries]) -> NormStats:
    """Per-feature z-score statistics on the training split.

    Zero-variance features are dropped and their original indices recorded so
    that inference applies the exact training-time treatment.
    """
    rows = np.concatenate([u.feature_matrix() for u in train_units], axis=0)
    if rows.shape[0] < 2:
        raise NormalizationError(f"need at least 2 records to fit, got {rows.shape[0]}")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    # constant columns can round to a tiny nonzero std; treat those as zero too
    floor = 1e-12 * np.maximum(1.0, np.abs(mean))
    dropped = [i for i in range(rows.shape[1]) if std[i] <= floor[i]]
    retained = [i for i in range(rows.shape[1]) if std[i] > floor[i]]
    if not retained:
        raise NormalizationError("all features are constant; nothing to retain")
    return NormStats(mean=mean[retained], std=std[retained], dropped=dropped)


def apply_normalizer(series: UnitSeries, stats: NormStats) -> np.ndarray:
    """Normalized [n_cycles x retained] feature matrix for one unit."""
    raw = series.feature_matrix()[:, stats.retained]
    return (raw - stats.mean) / stats.std


def denormalize(normalized: np.ndarray, stats: NormStats) -> np.ndarray:
    return normalized * stats.std + stats.mean


def make_windows(
    series: UnitSeries,
    stats: NormStats,
    window_len: int = DEFAULT_WINDOW_LEN,
    rul_cap: float = DEFAULT_RUL_CAP,
) -> List[RulWindow]:
    """One window per cycle c >= window_len, covering [c-window_len+1, c].

    Units shorter than window_len yield one left-padded window per cycle
    (first record repeated), flagged via `padded`.
    """
    if window_len < 1:
        raise ValueError(f"window_len must be >= 1, got {window_len}")
    X = apply_normalizer(series, stats)
    labels = dict(label_rul(series, rul_cap))
    T = X.shape[0]
    windows: List[RulWindow] = []
    if T >= window_len:
        for c in range(window_len, T + 1):
            windows.append(
                RulWindow(
                    inputs=X[c - window_len : c].copy(),
                    target_rul=labels[c],
                    unit_id=series.unit_id,
                    end_cycle=c,
                )
            )
    else:
        for c in range(1, T + 1):
            pad = np.repeat(X[:1], window_len - c, axis=0)
            windows.append(
                RulWindow(
                    inputs=np.concatenate([pad, X[:c]], axis=0),
                    target_rul=labels[c],
                    unit_id=series.unit_id,
                    end_cycle=c,
                    padded=True,
                )
            )
    return windows


def make_all_windows(
    units: Sequence[UnitSeries],
    stats: NormStats,
    window_len: int = DEFAULT_WINDOW_LEN,
    rul_cap: float = DEFAULT_RUL_CAP,
) -> List[RulWindow]:
    """Windows for every unit, ordered by (unit_id, end_cycle)."""
    out: List[RulWindow] = []
    for unit in units:
        out.extend(make_windows(unit, stats, window_len, rul_cap))
    return out
