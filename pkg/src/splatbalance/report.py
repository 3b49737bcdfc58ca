"""Run reports: fixed-key structured text plus a JSON mirror with the same content.

Text layout::

    # splatbalance run report
    version = 0.1.0
    command = ablate all
    [config]
    run.seed = 0
    ...
    [density]
    deviation_ratio = 1.40...
    ...
    [timings]
    t1_seconds = 0.41

Every section except ``[timings]`` is a metric block and is reproducible from
the config and seed. Floats use ``repr`` so values round-trip; infinity is
written as ``inf`` in both forms.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig

HEADER = "# splatbalance run report"


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def fmt_value(v) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(fmt_value(x) for x in v) + "]"
    return str(v)


def _json_value(v):
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return fmt_value(v)
    if isinstance(v, list):
        return [_json_value(x) for x in v]
    return v


@dataclass
class RunReport:
    command: str
    config: RunConfig
    blocks: dict = field(default_factory=dict)  # name -> {key: value}, insertion ordered
    timings: dict = field(default_factory=dict)
    version: str = __version__

    def add(self, name: str, values: dict) -> None:
        if name in ("config", "timings"):
            raise ValueError(f"block name {name!r} is reserved")
        self.blocks.setdefault(name, {}).update(values)

    def metric_text(self) -> str:
        """Everything except timings: the reproducible part of the report."""
        out = [HEADER, f"version = {self.version}", f"command = {self.command}", "[config]"]
        out.append(self.config.dump().rstrip("\n"))
        for name, vals in self.blocks.items():
            out.append(f"[{name}]")
            out += [f"{k} = {fmt_value(v)}" for k, v in vals.items()]
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        tail = ["[timings]"] + [f"{k} = {v:.6f}" for k, v in self.timings.items()]
        return self.metric_text() + "\n".join(tail) + "\n"

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "command": self.command,
            "config": {k: _json_value(v) for k, v in self.config.values.items()},
            "blocks": {n: {k: _json_value(v) for k, v in vals.items()} for n, vals in self.blocks.items()},
            "timings": {k: float(v) for k, v in self.timings.items()},
        }
        return json.dumps(doc, indent=2) + "\n"

    def write(self, out_dir, stem: str = "report") -> tuple[str, str]:
        os.makedirs(os.fspath(out_dir), exist_ok=True)
        tp = os.path.join(os.fspath(out_dir), stem + ".txt")
        jp = os.path.join(os.fspath(out_dir), stem + ".json")
        with open(tp, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())
        with open(jp, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        return tp, jp


def parse_report(text: str) -> dict:
    """Sections of a text report as {section: {key: raw string}}; top-level keys under ''."""
    out = {"": {}}
    cur = ""
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1]
            out.setdefault(cur, {})
            continue
        k, v = (p.strip() for p in s.split("=", 1))
        out[cur][k] = v
    return out


def config_from_report(text: str) -> RunConfig:
    """The echoed config of a text report, ready to re-run with."""
    return RunConfig(parse_report(text).get("config", {}))
