"""CSV, manifest and SVG emission.

Numbers are written with 9 significant digits, UTF-8, Unix newlines. Files
depend only on the aggregated data, so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import ConfigError
from .engine import AggregateResult

PER_AGENT_COLUMNS = ["round", "agent_id", "mean_regret", "std_regret"]
NETWORK_COLUMNS = ["round", "mean", "std", "ucb1_bound", "resilient_bound"]
SERIES_COLUMNS = ["series", "round", "mean", "std"]
FREQUENCY_COLUMNS = ["agent_id", "arm", "stage", "frequency"]


class DataError(ConfigError):
    """A CSV file does not match any known schema."""


def fmt(x: float) -> str:
    return f"{float(x):.9g}"


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _table(columns: Sequence[str], rows) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def per_agent_rows(result: AggregateResult):
    T = result.horizon
    mean = result.mean_regret
    std = result.std_regret
    for t in range(T):
        for h, agent in enumerate(result.normal_ids):
            yield (str(t + 1), str(agent), fmt(mean[t, h]), fmt(std[t, h]))


def network_rows(result: AggregateResult):
    bound = result.resilient_bound
    for t in range(result.horizon):
        yield (str(t + 1), fmt(result.mean_network[t]), fmt(result.std_network[t]),
               fmt(result.ucb1_bound[t]), "" if bound is None else fmt(bound[t]))


def frequency_rows(result: AggregateResult):
    freq = result.frequencies
    for h, agent in enumerate(result.normal_ids):
        for k in range(freq.shape[1]):
            for s in range(3):
                yield (str(agent), str(k), str(s + 1), fmt(freq[h, k, s]))


def series_rows(series: Mapping[str, AggregateResult]):
    for name, result in series.items():
        for t in range(result.horizon):
            yield (name, str(t + 1), fmt(result.mean_network[t]), fmt(result.std_network[t]))


def manifest_dict(result: AggregateResult, extra: Optional[dict] = None) -> dict:
    out = dict(result.manifest)
    out["budget_violation_rounds"] = result.budget_violations
    out["runs_detail"] = [
        {k: v for k, v in r.manifest.items() if k not in ("config_hash", "root_seed", "normal_ids")}
        for r in result.runs
    ]
    if extra:
        out.update(extra)
    return out


def _ensure_dir(out_dir: Union[str, Path]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def emit_csv(result: AggregateResult, out_dir: Union[str, Path], config_dict: Optional[dict] = None) -> list[Path]:
    """Write the regret, frequency and manifest files; returns their paths.

    Raises ``OSError`` when the directory cannot be created or written.
    """
    out = _ensure_dir(out_dir)
    files = {
        "regret_per_agent.csv": _table(PER_AGENT_COLUMNS, per_agent_rows(result)),
        "regret_network.csv": _table(NETWORK_COLUMNS, network_rows(result)),
        "frequencies.csv": _table(FREQUENCY_COLUMNS, frequency_rows(result)),
    }
    extra = {"config": config_dict} if config_dict is not None else None
    files["manifest.json"] = json.dumps(manifest_dict(result, extra), indent=2, sort_keys=True) + "\n"
    paths = []
    for name, text in files.items():
        _write(out / name, text)
        paths.append(out / name)
    return paths


def emit_series_csv(series: Mapping[str, AggregateResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)
    _write(path, _table(SERIES_COLUMNS, series_rows(series)))
    return path


# ---------------------------------------------------------------- reading and plotting


def read_series(csv_path: Union[str, Path]) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Load a regret CSV as ``{series: (round, mean, std)}``.

    Accepts the per-agent, network and series schemas.
    """
    text = Path(csv_path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file", str(csv_path)) from None
    if header == PER_AGENT_COLUMNS:
        key, r, m, s, label = 1, 0, 2, 3, "agent {}"
    elif header == NETWORK_COLUMNS:
        key, r, m, s, label = None, 0, 1, 2, "network"
    elif header == SERIES_COLUMNS:
        key, r, m, s, label = 0, 1, 2, 3, "{}"
    else:
        raise DataError(f"unrecognized header {','.join(header)!r}", str(csv_path))
    data: dict[str, list] = {}
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} columns", str(csv_path))
        name = label if key is None else label.format(row[key])
        try:
            data.setdefault(name, []).append((float(row[r]), float(row[m]), float(row[s])))
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric value", str(csv_path)) from None
    if not data:
        raise DataError("no data rows", str(csv_path))
    return {name: tuple(np.array(rows).T) for name, rows in data.items()}


def emit_plot(csv_path: Union[str, Path], out_path: Union[str, Path]) -> Path:
    """Render mean curves with shaded one-std bands to a deterministic SVG."""
    series = read_series(csv_path)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "byzbandit", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, (rounds, mean, std) in series.items():
            line, = ax.plot(rounds, mean, label=name, linewidth=1.2)
            ax.fill_between(rounds, mean - std, mean + std, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_xlabel("round")
        ax.set_ylabel("cumulative regret")
        ax.legend(loc="upper left", fontsize="small")
        fig.tight_layout()
        out = Path(out_path)
        _ensure_dir(out.parent)
        fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return out
