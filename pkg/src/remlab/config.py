"""Experiment configuration: flat ``key = value`` text under section headers.

Example::

    [experiment]
    command = process
    seed = 7
    out = runs/process
    threads = 4

    [field]
    field = uniform(0.5,1.5)
    m = 0.3

    [model]
    rho = 0.5
    n = 20
    replicates = 500
    window = -2:6

Every key is optional except ``command``; unset keys take the defaults of
:class:`ExperimentConfig`.  Without ``h_file`` the disorder is drawn from
``field`` with ``n`` sites and the run seed.  Serialisation writes only keys that differ from
their default, so parse -> serialise -> parse is the identity.
"""
from dataclasses import dataclass, field as dc_field, fields, replace
import configparser
import math

from .errors import ConfigError, RemlabError
from .field import FieldSpec, SpinBias, parse_field_spec, validate_field_spec
from .process import ThinningSpec, Window

COMMANDS = ("moments", "mgf", "solve", "tail", "process", "gibbs", "verify")
TAIL_METHODS = ("exact", "tilted", "sharp")

# key -> section
_SECTIONS = {
    "command": "experiment", "seed": "experiment", "out": "experiment", "threads": "experiment",
    "field": "field", "m": "field", "epsilon": "field", "h_file": "field",
    "rho": "model", "beta": "model", "n": "model", "n_grid": "model", "replicates": "model",
    "window": "model", "lambda_grid": "model", "lambda_star": "model",
    "a": "model", "C": "model", "x": "model", "method": "model", "samples": "model",
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int = 0
    out: str = "remlab-out"
    threads: int = 1
    field: FieldSpec = dc_field(default_factory=lambda: FieldSpec.uniform(0.5, 1.5))
    m: float = 0.3
    epsilon: float | None = None
    h_file: str | None = None
    rho: float = 0.5
    beta: float | None = None  # None: 2.5 times the asymptotic lambda~
    n: int = 20
    n_grid: tuple = ()
    replicates: int = 500
    window: Window | None = None  # None: [-2/lambda~, 6/lambda~]
    lambda_grid: tuple = (0.0, 2.0, 21)
    lambda_star: float = 2.0
    a: float | None = None  # with n_grid: fraction of Sigma_n, default 0.45
    C: float | None = None  # None: n c
    x: float = 0.0
    method: str = "exact"
    samples: int = 10**6

    @property
    def bias(self):
        return SpinBias(self.m, self.epsilon)

    @property
    def thinning(self):
        return ThinningSpec(self.rho, self.m, self.n)

    def validate(self):
        """Re-check every downstream parameter constraint; raise ConfigError."""
        try:
            if self.command not in COMMANDS:
                raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
            self.bias
            if self.h_file is None and self.command != "verify":
                validate_field_spec(self.field, self.m)
            if self.threads < 1:
                raise ConfigError("threads must be >= 1")
            if self.command in ("process", "gibbs"):
                self.thinning
                if not 1 <= self.n <= 26:
                    raise ConfigError(f"n = {self.n} outside the enumeration range [1, 26]")
                if self.replicates < 1:
                    raise ConfigError("replicates must be >= 1")
            if self.command == "gibbs" and self.beta is not None and not self.beta > 0:
                raise ConfigError("beta must be positive")
            if self.command == "tail":
                if self.method not in TAIL_METHODS:
                    raise ConfigError(f"method must be one of {TAIL_METHODS}")
                if self.a is None and not self.n_grid:
                    raise ConfigError("tail needs a")
                if self.n_grid and self.a is not None and not 0 < self.a < 1:
                    raise ConfigError("with n_grid, a is a fraction of Sigma_n in (0, 1)")
                if self.samples < 2:
                    raise ConfigError("samples must be >= 2")
            if not self.lambda_star > 1:
                raise ConfigError("lambda_star must exceed 1")
            lo, hi, steps = self.lambda_grid
            if not (lo <= hi and int(steps) >= 1):
                raise ConfigError("lambda grid needs lo <= hi and steps >= 1")
            if any(not 1 <= k <= 26 for k in self.n_grid):
                raise ConfigError("n_grid entries must lie in [1, 26]")
        except ConfigError:
            raise
        except (RemlabError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    # -- text form --------------------------------------------------------

    def to_text(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        defaults = ExperimentConfig(self.command)
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name != "command" and value == getattr(defaults, f.name):
                continue
            section = _SECTIONS[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, f.name, _format(f.name, value))
        lines = []
        for section in ("experiment", "field", "model"):
            if parser.has_section(section):
                lines.append(f"[{section}]")
                lines += [f"{k} = {v}" for k, v in parser.items(section)]
                lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        values = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in _SECTIONS:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                if _SECTIONS[key] != section:
                    raise ConfigError(f"key {key!r} belongs in [{_SECTIONS[key]}], not [{section}]")
                values[key] = _parse(key, raw.strip())
        if "command" not in values:
            raise ConfigError("config needs [experiment] command")
        return cls(**values)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _format(name, value):
    if value is None:
        return "none"
    if name == "field":
        return value.describe()
    if name == "window":
        return f"{value.x_lo!r}:{value.x_hi!r}"
    if name == "lambda_grid":
        lo, hi, steps = value
        return f"{lo!r}:{hi!r}:{int(steps)}"
    if name == "n_grid":
        return ",".join(str(k) for k in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name, raw):
    try:
        if raw.lower() == "none":
            return None
        if name == "field":
            return parse_field_spec(raw)
        if name == "window":
            return Window.parse(raw)
        if name == "lambda_grid":
            lo, hi, steps = raw.split(":")
            return (float(lo), float(hi), int(steps))
        if name == "n_grid":
            return tuple(int(k) for k in raw.split(",") if k.strip())
        if name in ("seed", "threads", "n", "replicates", "samples"):
            return int(raw)
        if name in ("command", "out", "h_file", "method"):
            return raw
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("non-finite value")
        return v
    except (ValueError, RemlabError) as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r} ({exc})") from exc
