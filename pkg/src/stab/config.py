"""Scenario configuration files (TOML with fixed sections).

Example::

    [grid]
    n1 = 256
    n2 = 256
    blur_k = 3
    epsilon = 0.01

    [schedule]
    m = 15
    lambda = 1.0                        # scalar, list, or {uniform = [lo, hi]}
    tau = 0.01
    eta = 0.9
    mu = 1.0
    chi_bar = 0.0

    [prox]
    kind = "nonneg"
    prefilter = "identity"

    [sweep]
    lambda = [0.01, 2.0, 200]          # start, stop, count
    eta = [0.0, 1.0, 100]
    alpha = [0.5, 0.75, 1.0]

    [verify]
    seed = 0
    trials = 1000
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coeffs import LayerSchedule
from .network import ProxSpec
from .spectral import FrequencyGrid, PreFilterSpec, build_eigensystem, prefilter_eigs

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config", "dump_config"]


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"n1": 256, "n2": 256, "blur_k": 3, "epsilon": 1e-2},
    "schedule": {"m": 15, "lambda": 1.0, "tau": 1e-2, "eta": 1.0, "mu": 1.0, "chi_bar": 0.0},
    "prox": {"kind": "nonneg", "lo": 0.0, "hi": 1.0, "prefilter": "identity", "prefilter_sigma": 1e-2},
    "sweep": {"lambda": [0.01, 2.0, 200], "eta": [0.0, 1.0, 100], "alpha": [0.5, 0.75, 1.0]},
    "verify": {"seed": 0, "trials": 1000, "noise_sigma": 0.0},
}


def _merge(raw):
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    out = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        bad = set(values) - set(DEFAULTS[section])
        if bad:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(bad))}")
        out[section].update(values)
    return out


def _check_range(name, r):
    if not (isinstance(r, list) and len(r) == 3):
        raise ConfigError(f"sweep {name} must be [start, stop, count]")
    start, stop, count = r
    if int(count) != count or count < 2 or not start < stop:
        raise ConfigError(f"sweep {name} needs count >= 2 and start < stop, got {r}")
    return float(start), float(stop), int(count)


def _resolve_layers(name, value, m, rng):
    if isinstance(value, dict):
        if set(value) != {"uniform"} or len(value["uniform"]) != 2:
            raise ConfigError(f"{name} table must be {{uniform = [lo, hi]}}")
        lo, hi = map(float, value["uniform"])
        if not lo <= hi:
            raise ConfigError(f"{name} uniform range needs lo <= hi")
        return rng.uniform(lo, hi, m).tolist()
    if isinstance(value, list):
        if len(value) != m:
            raise ConfigError(f"{name} list has {len(value)} entries, expected m = {m}")
        return [float(v) for v in value]
    return float(value)


@dataclass
class ScenarioConfig:
    """Validated scenario with per-layer random draws already resolved."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        d = self.data
        g = d["grid"]
        for k in ("n1", "n2", "blur_k"):
            if int(g[k]) != g[k] or g[k] < 1:
                raise ConfigError(f"grid.{k} must be a positive integer")
        if g["blur_k"] % 2 == 0 or g["blur_k"] > min(g["n1"], g["n2"]):
            raise ConfigError(f"grid.blur_k must be odd and at most min(n1, n2), got {g['blur_k']}")
        if not g["epsilon"] > 0:
            raise ConfigError("grid.epsilon must be positive")
        s = d["schedule"]
        if int(s["m"]) != s["m"] or s["m"] < 1:
            raise ConfigError("schedule.m must be a positive integer")
        rng = np.random.default_rng(d["verify"]["seed"])
        for k in ("lambda", "tau", "eta", "mu"):
            s[k] = _resolve_layers(k, s[k], s["m"], rng)
        for k in ("lambda", "eta"):
            d["sweep"][k] = list(_check_range(k, d["sweep"][k]))
        alphas = d["sweep"]["alpha"]
        if not isinstance(alphas, list) or not all(0.5 <= a <= 1.0 for a in alphas):
            raise ConfigError("sweep.alpha must be a list of values in [0.5, 1]")
        v = d["verify"]
        if int(v["trials"]) != v["trials"] or v["trials"] < 1:
            raise ConfigError("verify.trials must be a positive integer")
        if v["noise_sigma"] < 0:
            raise ConfigError("verify.noise_sigma must be nonnegative")
        try:
            self.schedule()
            self.prox()
            self.prefilter_spec()
            FrequencyGrid(g["n1"], g["n2"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def m(self):
        return self.data["schedule"]["m"]

    @property
    def seed(self):
        return self.data["verify"]["seed"]

    @property
    def trials(self):
        return self.data["verify"]["trials"]

    @property
    def alphas(self):
        return [float(a) for a in self.data["sweep"]["alpha"]]

    def is_stationary(self):
        s = self.data["schedule"]
        return not any(isinstance(s[k], list) for k in ("lambda", "tau", "eta", "mu"))

    def schedule(self, **override):
        s = dict(self.data["schedule"])
        s.update(override)
        return LayerSchedule.build(s["m"], s["lambda"], s["tau"], s["eta"], s["mu"], s["chi_bar"])

    def grid(self, n1=None, n2=None):
        g = self.data["grid"]
        return FrequencyGrid(int(n1 or g["n1"]), int(n2 or g["n2"]))

    def eigensystem(self, grid=None):
        g = self.data["grid"]
        return build_eigensystem(grid or self.grid(), g["blur_k"], g["epsilon"])

    def prox(self):
        p = self.data["prox"]
        return ProxSpec(p["kind"], float(p["lo"]), float(p["hi"]))

    def prefilter_spec(self):
        p = self.data["prox"]
        if p["prefilter"] == "wiener":
            return PreFilterSpec.wiener(p["prefilter_sigma"])
        return PreFilterSpec(p["prefilter"])

    def phi(self, eig):
        return prefilter_eigs(self.prefilter_spec(), eig)

    def sweep_values(self, name):
        start, stop, count = self.data["sweep"][name]
        return np.linspace(start, stop, int(count))

    def with_grid(self, n1, n2):
        data = copy.deepcopy(self.data)
        data["grid"]["n1"], data["grid"]["n2"] = int(n1), int(n2)
        kmax = min(n1, n2)
        kmax -= 1 - kmax % 2
        data["grid"]["blur_k"] = min(data["grid"]["blur_k"], kmax)
        return ScenarioConfig(data)


def parse_config(text):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return ScenarioConfig(_merge(raw))


def load_config(path):
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def dump_config(cfg):
    """Serialize the effective configuration (defaults and draws resolved)."""
    lines = []
    for section in DEFAULTS:
        lines.append(f"[{section}]")
        for key, value in cfg.data[section].items():
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)
