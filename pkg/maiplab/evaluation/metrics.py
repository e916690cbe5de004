# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from maiplab.errors import ConfigurationError
from maiplab.utils import wrap_degrees


METRICS = ('theta', 'v')
METRIC_UNITS = {'theta': 'deg', 'v': 'm/s'}
CSV_COLUMNS = ('method', 'horizon_s', 'metric', 'mean', 'std')
CSV_NOTE = ("# std: population standard deviation (ddof=0) of the test-set RMSE across the sampled draws; "
            "empty for deterministic methods")


def rmse_per_draw(pred, y):
    """
    Test-set RMSE of each draw at each horizon step.

    Args:
        pred: [N, n, Tp, 2] sampled (v, theta) futures
        y: [N, Tp, 2] ground truth
    Returns:
        [n, Tp, 2] with (v, theta) RMSE; theta differences are wrapped to [-180, 180)
    """
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape[0] == 0:
        raise ConfigurationError("cannot compute RMSE on an empty test set")
    if pred.ndim != 4 or y.shape != (pred.shape[0],) + pred.shape[2:]:
        raise ConfigurationError(f"predictions {pred.shape} are not aligned with ground truth {y.shape}")
    diff = pred - y[:, None]
    dv = diff[..., 0]
    dtheta = wrap_degrees(diff[..., 1])
    return np.stack([np.sqrt(np.mean(dv ** 2, axis=0)), np.sqrt(np.mean(dtheta ** 2, axis=0))], axis=-1)


@dataclass(frozen=True)
class MetricRow:
    method: str
    horizon_s: float
    metric: str
    mean: float
    std: Optional[float] = None


@dataclass
class MetricTable:
    """
    RMSE rows keyed by (method, horizon in seconds, metric); metric is 'theta'
    (degrees) or 'v' (m/s).
    """
    rows: List[MetricRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def methods(self):
        return list(dict.fromkeys(r.method for r in self.rows))

    @property
    def horizons(self):
        return sorted(set(r.horizon_s for r in self.rows))

    def get(self, method, horizon_s, metric):
        for r in self.rows:
            if r.method == method and abs(r.horizon_s - horizon_s) < 1e-9 and r.metric == metric:
                return r
        raise KeyError((method, horizon_s, metric))

    def series(self, method, metric):
        """mean RMSE of one method and metric, ordered by horizon"""
        rows = sorted((r for r in self.rows if r.method == method and r.metric == metric), key=lambda r: r.horizon_s)
        return np.array([r.mean for r in rows])

    def extend(self, other):
        self.rows.extend(other.rows)
        return self

    # -- CSV --------------------------------------------------------------
    def to_csv(self, path=None):
        """
        Write `method,horizon_s,metric,mean,std` rows after a `#` note line.
        Floats are written with repr so parsing reproduces them exactly.
        Returns the CSV text.
        """
        buf = io.StringIO()
        buf.write(CSV_NOTE + '\n')
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.method, repr(float(r.horizon_s)), r.metric, repr(float(r.mean)),
                             '' if r.std is None else repr(float(r.std))])
        text = buf.getvalue()
        if path is not None:
            dirname = os.path.dirname(path)
            if dirname:
                os.makedirs(dirname, exist_ok=True)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """parse a file path or CSV text written by `to_csv`"""
        if '\n' not in source and os.path.exists(source):
            with open(source, 'r', encoding='utf-8') as f:
                source = f.read()
        lines = [line for line in source.splitlines() if line and not line.startswith('#')]
        reader = csv.DictReader(lines)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigurationError(f"metric table columns must be {','.join(CSV_COLUMNS)}, got {reader.fieldnames}")
        rows = [MetricRow(rec['method'], float(rec['horizon_s']), rec['metric'], float(rec['mean']),
                          None if rec['std'] == '' else float(rec['std'])) for rec in reader]
        return cls(rows)

    # -- text -------------------------------------------------------------
    def format_table(self, precision=2):
        """
        Text rendering with one line per method, theta columns then v columns,
        each cell `mean ± std` (mean only for deterministic methods).
        """
        horizons = self.horizons
        header = ['method'] + [f"{m} {h:g}s" for m in METRICS for h in horizons]
        lines = []
        for method in self.methods:
            cells = [method]
            for m in METRICS:
                for h in horizons:
                    try:
                        r = self.get(method, h, m)
                    except KeyError:
                        cells.append('-')
                        continue
                    cell = f"{r.mean:.{precision}f}"
                    if r.std is not None:
                        cell += f" ± {r.std:.{precision}f}"
                    cells.append(cell)
            lines.append(cells)
        widths = [max(len(row[k]) for row in [header] + lines) for k in range(len(header))]
        fmt = lambda row: ' | '.join(c.ljust(w) for c, w in zip(row, widths))
        out = [f"theta in {METRIC_UNITS['theta']}, v in {METRIC_UNITS['v']}", fmt(header),
               '-+-'.join('-' * w for w in widths)]
        out.extend(fmt(row) for row in lines)
        return '\n'.join(out)


def rmse_table(predictions, ground_truth, deterministic=(), dt=0.2):
    """
    Table of mean (and std across draws) RMSE per method, horizon and metric.

    Args:
        predictions: dict method -> [N, n, Tp, 2] sampled futures aligned with ground_truth
        ground_truth: [N, Tp, 2], or a dict method -> [N, Tp, 2] when methods were
            evaluated on different sample sets
        deterministic: methods whose draws are identical; only their first draw is
            scored and std is left empty
        dt: seconds per horizon step
    """
    table = MetricTable()
    for method, pred in predictions.items():
        y = ground_truth[method] if isinstance(ground_truth, dict) else ground_truth
        pred = np.asarray(pred, dtype=np.float64)
        det = method in deterministic
        if det:
            pred = pred[:, :1]
        rmse = rmse_per_draw(pred, y)
        mean = rmse.mean(axis=0)
        std = rmse.std(axis=0, ddof=0)
        for m_idx, metric in ((1, 'theta'), (0, 'v')):
            for h in range(rmse.shape[1]):
                table.rows.append(MetricRow(method, round((h + 1) * dt, 6), metric, float(mean[h, m_idx]),
                                            None if det else float(std[h, m_idx])))
    return table


def average_tables(tables) -> MetricTable:
    """
    Average the means of matching rows across tables (e.g. runs with
    different seeds); std is the mean of the per-table stds.
    """
    tables = list(tables)
    if not tables:
        raise ConfigurationError("no metric tables to average")
    groups: Dict[tuple, List[MetricRow]] = {}
    for table in tables:
        for r in table.rows:
            groups.setdefault((r.method, r.horizon_s, r.metric), []).append(r)
    rows = []
    for (method, horizon, metric), rs in groups.items():
        stds = [r.std for r in rs if r.std is not None]
        rows.append(MetricRow(method, horizon, metric, float(np.mean([r.mean for r in rs])),
                              float(np.mean(stds)) if len(stds) == len(rs) else None))
    return MetricTable(rows)
