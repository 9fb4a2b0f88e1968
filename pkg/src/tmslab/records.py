"""Result records, CSV series and deterministic SVG plots."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

__all__ = ["Check", "Series", "ResultRecord", "emit_plot", "write_outputs", "read_record"]


def _clean(x):
    """Plain JSON value: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: object = None
    threshold: object = None
    detail: str = ""

    def to_dict(self):
        return {"passed": bool(self.passed), "value": _clean(self.value),
                "threshold": _clean(self.threshold), "detail": self.detail}


@dataclass(frozen=True)
class Series:
    """Named table written as ``series_<name>.csv``."""

    name: str
    columns: tuple
    rows: tuple

    def to_dict(self):
        return {"columns": list(self.columns), "rows": _clean([list(r) for r in self.rows])}

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in _clean(list(r))])
        return buf.getvalue()


@dataclass
class ResultRecord:
    """Outcome of one experiment.

    Everything except ``runtime`` (wall time, thread count) is a pure
    function of the configuration's :meth:`inputs`.
    """

    experiment_id: str
    inputs: dict
    scalars: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def add_check(self, check: Check):
        self.checks[check.name] = check.to_dict()

    def add_series(self, s: Series):
        self.series[s.name] = s.to_dict()

    def to_dict(self, include_runtime=True) -> dict:
        d = {"experiment_id": self.experiment_id, "inputs": _clean(self.inputs),
             "scalars": _clean(self.scalars), "series": self.series, "checks": self.checks}
        if include_runtime:
            d["runtime"] = _clean(self.runtime)
        return d

    def to_json(self, include_runtime=True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ResultRecord":
        return cls(d["experiment_id"], d["inputs"], d.get("scalars", {}), d.get("series", {}),
                   d.get("checks", {}), d.get("runtime", {}))

    @classmethod
    def from_json(cls, text) -> "ResultRecord":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, ResultRecord):
            return NotImplemented
        return self.to_json() == other.to_json()


@dataclass(frozen=True)
class PlotSpec:
    name: str
    curves: tuple  # (label, x, y)
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    logx: bool = False
    logy: bool = False
    markers: bool = False


def emit_plot(curves, path, xlabel="", ylabel="", title="", logx=False, logy=False, markers=False):
    """Write ``curves`` (sequence of ``(label, x, y)``) as an SVG with stable bytes."""
    curves = list(curves)
    if not curves or not any(len(c[1]) for c in curves):
        raise ValueError("nothing to plot")
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot()
    for label, x, y in curves:
        ax.plot(x, y, "o-" if markers else "-", label=label, markersize=3, linewidth=1.2)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if any(c[0] for c in curves):
        ax.legend(frameon=False)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "tmslab", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return Path(path)


def write_outputs(record: ResultRecord, series, plots, out_dir) -> Path:
    """Write ``record.json``, ``series_*.csv`` and ``plot_*.svg`` under ``out_dir/<id>``."""
    d = Path(out_dir) / record.experiment_id
    d.mkdir(parents=True, exist_ok=True)
    for s in series:
        (d / f"series_{s.name}.csv").write_text(s.csv_text(), encoding="utf-8")
    for p in plots:
        emit_plot(p.curves, d / f"plot_{p.name}.svg", p.xlabel, p.ylabel, p.title, p.logx, p.logy, p.markers)
    (d / "record.json").write_text(record.to_json(), encoding="utf-8")
    return d


def read_record(path) -> ResultRecord:
    return ResultRecord.from_json(Path(path).read_text(encoding="utf-8"))
