"""Run configuration and the flat key-value config file format.

The file format is a TOML-compatible subset: one `key = value` per line,
`#` comments, values are integers, floats, booleans, quoted strings, or
flat numeric arrays. Keys are exactly the RunConfig fields.
"""

import math
from dataclasses import dataclass, field, fields, asdict

from .errors import ConfigError

SCENARIOS = ("constant", "gaussian_bump", "equivariant", "bubble",
             "random_band")


@dataclass
class RunConfig:
    target: str = "sphere"
    N: int = 64
    L: float = 2.0 * math.pi
    dt: float = 1e-4
    T: float = 2e-3
    s_max: float = 0.0            # 0 -> L^2/2
    n_s_slices: int = 96          # uniform steps in the linear s-ramp
    scenario: str = "gaussian_bump"
    amplitude: float = 0.2
    width: float = 0.4
    equivariant_m: int = 1
    bubble_scale: float = 0.0     # 0 -> L/64
    target_energy: float = 1.0
    band_k: int = 3
    delta: float = 0.1
    sigma_max: int = 1
    angle_count: int = 4
    lambda_samples: list = field(default_factory=list)  # [] -> per-band default
    seed: int = 0
    retain_every: int = 0         # 0 -> ceil(T / (10 dt))
    residual_tol: float = 1e-3
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.target not in ("sphere", "hyperbolic"):
            raise ConfigError(f"unknown target {self.target!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"choose from {SCENARIOS}")
        positive = ["N", "L", "dt", "T", "n_s_slices", "delta",
                    "angle_count", "residual_tol"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ["s_max", "amplitude", "width", "bubble_scale",
                     "target_energy", "retain_every", "sigma_max"]:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.N & (self.N - 1) or self.N < 16:
            raise ConfigError("N must be a power of two, N >= 16")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError("delta must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    @property
    def mu(self):
        return +1 if self.target == "sphere" else -1

    def resolved_s_max(self):
        return self.s_max if self.s_max > 0 else self.L ** 2 / 2.0

    def resolved_bubble_scale(self):
        return self.bubble_scale if self.bubble_scale > 0 else self.L / 64.0

    def resolved_retain_every(self):
        if self.retain_every > 0:
            return self.retain_every
        return max(1, math.ceil(self.T / (10.0 * self.dt)))


def _parse_value(text, key):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [float(x) for x in inner.split(",")]
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r} for key {key!r}")


def parse_config_text(text):
    known = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(val, key)
    try:
        return RunConfig(**_coerce(values))
    except TypeError as exc:
        raise ConfigError(str(exc))


def _coerce(values):
    out = {}
    spec = {f.name: f.default for f in fields(RunConfig)}
    for key, val in values.items():
        default = spec.get(key)
        if isinstance(default, bool):
            out[key] = bool(val)
        elif isinstance(default, int) and not isinstance(val, list):
            if isinstance(val, float) and not val.is_integer():
                raise ConfigError(f"{key} must be an integer")
            out[key] = int(val)
        elif isinstance(default, float) and not isinstance(val, list):
            out[key] = float(val)
        else:
            out[key] = val
    return out


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_to_text(cfg):
    """Serialize as the flat key = value format (deterministic order)."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, str):
            lines.append(f'{f.name} = "{v}"')
        elif isinstance(v, bool):
            lines.append(f"{f.name} = {'true' if v else 'false'}")
        elif isinstance(v, list):
            lines.append(f"{f.name} = [{', '.join(repr(float(x)) for x in v)}]")
        elif isinstance(v, float):
            lines.append(f"{f.name} = {v!r}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
