"""Metric rows, CSV emission, convergence detection and multi-seed summaries."""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

COLUMNS = ("epoch", "seed", "algorithm", "mean_episode_reward", "cost_purchase", "cost_holding", "cost_wastage",
           "cost_shortage", "cost_transport", "fill_rate", "wasted_units", "wall_clock_ms")
SWEEP_COLUMNS = ("axis", "axis_value") + COLUMNS
INVENTORY_COSTS = ("cost_holding", "cost_wastage", "cost_shortage", "cost_transport")


def row_from_stats(epoch: int, seed: int, algorithm: str, stats, wall_ms: float) -> dict:
    c = stats.costs
    return {"epoch": int(epoch), "seed": int(seed), "algorithm": algorithm,
            "mean_episode_reward": float(stats.reward), "cost_purchase": float(c.purchasing),
            "cost_holding": float(c.holding), "cost_wastage": float(c.wastage), "cost_shortage": float(c.shortage),
            "cost_transport": float(c.transport), "fill_rate": float(stats.fill_rate),
            "wasted_units": float(stats.wasted_units), "wall_clock_ms": float(wall_ms)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class MetricsLog:
    """Append-only table of metric rows; epochs are monotone per (seed, algorithm[, axis value])."""

    def __init__(self, rows: Iterable[dict] = (), sweep: bool = False):
        self.sweep = sweep
        self._rows: list[dict] = []
        self._last: dict = {}
        self._lock = threading.Lock()
        for r in rows:
            self.append(r)

    @property
    def columns(self) -> tuple:
        return SWEEP_COLUMNS if self.sweep else COLUMNS

    @property
    def rows(self) -> list[dict]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self):
        return iter(list(self._rows))

    def append(self, row: dict) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise ValueError(f"metric row missing {missing}")
        key = (row.get("axis"), row.get("axis_value"), row["seed"], row["algorithm"])
        with self._lock:
            if key in self._last and row["epoch"] < self._last[key]:
                raise ValueError(f"epoch went backwards for {key}: {row['epoch']} < {self._last[key]}")
            self._last[key] = row["epoch"]
            self._rows.append({c: row[c] for c in self.columns})

    def extend(self, rows: Iterable[dict]) -> None:
        for r in rows:
            self.append(r)

    def select(self, **match) -> list[dict]:
        return [r for r in self._rows if all(r[k] == v for k, v in match.items())]

    def to_csv(self, exclude: Sequence[str] = ()) -> str:
        cols = [c for c in self.columns if c not in exclude]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self._rows:
            w.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "MetricsLog":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            sweep = tuple(reader.fieldnames or ()) == SWEEP_COLUMNS
            if not sweep and tuple(reader.fieldnames or ()) != COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            rows = []
            for r in reader:
                out = {}
                for k, v in r.items():
                    if k in ("epoch", "seed"):
                        out[k] = int(v)
                    elif k in ("algorithm", "axis"):
                        out[k] = v
                    else:
                        out[k] = float(v)
                rows.append(out)
        return cls(rows, sweep=sweep)


def _slope(y: np.ndarray) -> float:
    x = np.arange(len(y), dtype=float)
    x -= x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def detect_convergence(rewards: Sequence[float], window: int = 50, slope_tol: float = 1e-3) -> int | None:
    """First epoch (1-based) whose trailing window is flat and stays flat one window later.

    "Flat" means the least-squares slope is below ``slope_tol * |window mean|``
    in magnitude.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    y = np.asarray(rewards, dtype=float)
    n = len(y)

    def flat(end: int) -> bool:
        seg = y[end - window:end]
        return abs(_slope(seg)) <= slope_tol * abs(seg.mean())

    for end in range(window, n - window + 1):
        if flat(end) and all(flat(e) for e in range(end + 1, end + window + 1)):
            return end
    return None


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    axis_value: object
    n: int
    reward_mean: float
    reward_std: float
    cost_mean: float        # inventory cost: holding + wastage + shortage + transport
    cost_std: float
    gap_pct: float          # (cost - best cost) / best cost * 100 within the same axis value


def inventory_cost(row: dict) -> float:
    return float(sum(row[c] for c in INVENTORY_COSTS))


def _mean_std(v: list[float]) -> tuple[float, float]:
    a = np.asarray(v, dtype=float)
    return float(a.mean()), (float(a.std(ddof=1)) if len(a) > 1 else 0.0)


def summarize(log: MetricsLog | Iterable[dict], final_only: bool = True) -> list[SummaryRow]:
    """Mean and sample std over seeds per (algorithm, axis value), plus the optimality gap.

    With ``final_only`` each (seed, algorithm, axis value) contributes its
    last row, i.e. the evaluation or final-epoch figure.
    """
    rows = list(log)
    last: dict = {}
    for r in rows:
        key = (r["algorithm"], r.get("axis_value"), r["seed"])
        if final_only:
            last[key] = r
        else:
            last.setdefault(key, []).append(r)
    groups: dict = {}
    for (algo, av, _seed), r in last.items():
        vals = [r] if final_only else r
        g = groups.setdefault((algo, av), {"reward": [], "cost": []})
        for x in vals:
            g["reward"].append(float(x["mean_episode_reward"]))
            g["cost"].append(inventory_cost(x))
    stats = {k: (_mean_std(v["reward"]), _mean_std(v["cost"]), len(v["reward"])) for k, v in groups.items()}
    best: dict = {}
    for (algo, av), (_, (cm, _), _) in stats.items():
        best[av] = min(best.get(av, math.inf), cm)
    out = []
    for (algo, av), ((rm, rs), (cm, cs), n) in stats.items():
        b = best[av]
        gap = 0.0 if cm == b else ((cm - b) / b * 100.0 if b != 0 else math.inf)
        out.append(SummaryRow(algo, av, n, rm, rs, cm, cs, gap))
    return out


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = [f"{'algorithm':<18} {'axis':>8} {'n':>3} {'reward':>24} {'inventory cost':>24} {'gap %':>8}"]
    for r in rows:
        av = "" if r.axis_value is None else f"{r.axis_value:g}" if isinstance(r.axis_value, float) else str(r.axis_value)
        lines.append(f"{r.algorithm:<18} {av:>8} {r.n:>3} {r.reward_mean:>12.1f} ± {r.reward_std:<9.1f} "
                     f"{r.cost_mean:>12.1f} ± {r.cost_std:<9.1f} {r.gap_pct:>8.2f}")
    return "\n".join(lines)
