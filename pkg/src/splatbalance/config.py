"""Flat ``key = value`` run configuration with namespaced, typed keys."""

from __future__ import annotations

import os

from .density import DensityParams
from .errors import ConfigError
from .render import RenderConfig

AUTO = "auto"

# key: (default, type, help). A default of AUTO means "derived from the data".
SCHEMA: dict[str, tuple[object, type, str]] = {
    "run.seed": (0, int, "seed for fixtures and density control"),
    "run.fixture": ("contrast100", str, "fixture used when no scene file is given"),
    "render.width": (256, int, "image width, multiple of 16"),
    "render.height": (256, int, "image height, multiple of 16"),
    "render.alpha_min": (1.0 / 255.0, float, "skip splats whose alpha is below this"),
    "render.t_min": (1e-4, float, "stop blending once transmittance drops below this"),
    "render.early_stop": (True, bool, "apply the transmittance cutoff"),
    "render.backend": (AUTO, str, "kernel backend: auto, cython or python"),
    "density.radius_r": (AUTO, float, "neighbour radius; auto = median 8-NN distance"),
    "density.alpha": (1.0, float, "rho_low = mu - alpha * sigma"),
    "density.beta": (1.0, float, "rho_high = mu + beta * sigma"),
    "density.gamma": (1.0, float, "d_merge = mu_d + gamma * sigma_d"),
    "density.k": (8, int, "neighbours for distance statistics"),
    "density.alpha_sigma": (1.5, float, "spawn spread in units of mean k-NN distance"),
    "density.delta": (AUTO, float, "uniform jitter half-width; auto = 0.1 * radius_r"),
    "density.max_rounds": (4, int, "densification rounds per step"),
    "density.interval": (1500, int, "loop iterations between density-control steps"),
    "density.overlap_factor": (1.0, float, "merged opacity = min(1, sum * overlap_factor)"),
    "workload.t_sparse": (AUTO, float, "rho at or below this is sparse; auto = 0.25 * median"),
    "workload.t_dense": (AUTO, float, "rho at or above this is dense; auto = median"),
    "workload.packing": ("row_major", str, "pixel-to-lane order: row_major or morton"),
    "workload.mode": ("both", str, "baseline, adaptive or both"),
    "memory.segment_bytes": (128, int, "memory transaction segment size"),
    "memory.cost_ratio": (10.0, float, "global transaction cost over shared read cost"),
    "memory.layout": ("both", str, "channel_split, interleaved or both"),
    "color.keep_fraction": (0.5, float, "fraction of Gaussians kept by importance ranking"),
    "color.invert": (False, bool, "rank by descending importance instead"),
    "loop.iterations": (3000, int, "loop iterations"),
    "loop.cameras": (1, int, "number of cameras, offset around the standard rig"),
}

CHOICES = {
    "render.backend": ("auto", "cython", "python"),
    "workload.packing": ("row_major", "morton"),
    "workload.mode": ("baseline", "adaptive", "both"),
    "memory.layout": ("channel_split", "interleaved", "both"),
    "run.fixture": ("contrast100", "gap40", "uniform", "clustered"),
}


def _coerce(key: str, raw):
    default, typ, _ = SCHEMA[key]
    if isinstance(raw, str):
        text = raw.strip()
        if default == AUTO and text == AUTO:
            return AUTO
        try:
            if typ is bool:
                low = text.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(text)
                val = low in ("true", "1", "yes")
            elif typ is int:
                val = int(text)
            elif typ is float:
                val = float(text)
            else:
                val = text
        except ValueError:
            raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None
    else:
        val = raw
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if val != AUTO and not isinstance(val, typ):
            raise ConfigError(f"{key}: expected {typ.__name__}, got {type(val).__name__}")
    if key in CHOICES and val not in CHOICES[key]:
        raise ConfigError(f"{key}: {val!r} not one of {', '.join(CHOICES[key])}")
    return val


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunConfig:
    def __init__(self, values: dict | None = None):
        self.values = {k: v[0] for k, v in SCHEMA.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _coerce(key, value)

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cfg = cls()
        for n, line in enumerate(text.splitlines(), 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ConfigError(f"config line {n}: expected 'key = value'")
            k, v = (p.strip() for p in s.split("=", 1))
            try:
                cfg.set(k, v)
            except ConfigError as e:
                raise ConfigError(f"config line {n}: {e}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(os.fspath(path), "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def dump(self, with_help: bool = False) -> str:
        lines = []
        for k in SCHEMA:
            line = f"{k} = {_fmt(self.values[k])}"
            if with_help:
                line = f"{line:<40} # {SCHEMA[k][2]}"
            lines.append(line)
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return dict(self.values)

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values

    # -- typed views ------------------------------------------------------------------

    def _opt(self, key):
        v = self.values[key]
        return None if v == AUTO else v

    def density_params(self) -> DensityParams:
        return DensityParams(
            radius_r=self._opt("density.radius_r"), alpha=self["density.alpha"], beta=self["density.beta"],
            gamma=self["density.gamma"], k=self["density.k"], alpha_sigma=self["density.alpha_sigma"],
            delta=self._opt("density.delta"), max_rounds=self["density.max_rounds"],
            interval=self["density.interval"], overlap_factor=self["density.overlap_factor"])

    def render_config(self) -> RenderConfig:
        b = self["render.backend"]
        return RenderConfig(alpha_min=self["render.alpha_min"], t_min=self["render.t_min"],
                            early_stop=self["render.early_stop"], backend=None if b == AUTO else b)

    def workload_thresholds(self):
        lo, hi = self._opt("workload.t_sparse"), self._opt("workload.t_dense")
        if (lo is None) != (hi is None):
            raise ConfigError("set both workload.t_sparse and workload.t_dense, or neither")
        return None if lo is None else (lo, hi)
