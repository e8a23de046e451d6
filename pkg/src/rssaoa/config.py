"""Run configuration: flat ``key = value`` files with command-line overrides.

Every key has a type and a default. Values set in a file remember their
line so validation errors can point at it; flags override file values.
``RunConfig.dump()`` gives the canonical serialisation that is embedded
in every JSON sidecar, and parsing that dump yields an equal config.
"""
import math
from dataclasses import dataclass, field

from .channel import AoaVarianceParams, ChannelParams, sigma_from_db
from .pointproc import (
    AlphaGinibre,
    MaternCluster,
    MaternI,
    MaternII,
    PoissonProcess,
    ThomasCluster,
)


class ConfigError(ValueError):
    pass


def _float_list(text):
    items = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    return tuple(float(t) for t in items)


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


# key -> (parser, default)
KEYS = {
    "dim": (int, 2),
    "radius": (float, 30.0),
    "model": (str, "ppp"),
    "lambda": (_opt_float, 1.0),
    "lambda_p": (_opt_float, None),
    "target_lambda": (_opt_float, None),
    "rc": (float, 0.3),
    "cbar": (_opt_float, None),
    "sigma_c": (float, 0.3),
    "alpha": (float, 0.8),
    "ginibre_method": (str, "eigen"),
    "K": (float, 4250.0),
    "beta": (float, 3.52),
    "sigma_db": (float, 12.0),
    "tau_min": (float, math.pi / 90),
    "tau_max": (float, math.pi / 12),
    "aoa_a": (float, 0.05),
    "aoa_r0": (float, 25.0),
    "reps": (int, 5000),
    "seed": (_opt_int, None),
    "threads": (int, 1),
    "deterministic": (_bool, True),
    "n_cal": (int, 10_000),
    "n_mc": (int, 1_000_000),
    "grid": (_float_list, ()),
}

# execution details that do not change results
NON_SEMANTIC = ("threads",)

MODEL_KINDS = ("ppp", "matern1", "matern2", "mcp", "tcp", "ginibre")


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in KEYS.items()})
    origins: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def set(self, key, raw, origin):
        if key not in KEYS:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        parser, _ = KEYS[key]
        try:
            self.values[key] = parser(raw) if isinstance(raw, str) else _coerce(parser, raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: bad value for {key!r}: {exc}") from None
        self.origins[key] = origin

    def where(self, key):
        return self.origins.get(key, f"default {key}")

    def dump(self, include_non_semantic=False):
        keys = sorted(k for k in self.values if include_non_semantic or k not in NON_SEMANTIC)
        return "".join(f"{k}={_format(self.values[k])}\n" for k in keys)

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())
                if k not in NON_SEMANTIC}

    # -- derived objects -------------------------------------------------

    def channel(self):
        try:
            aoa = AoaVarianceParams(self["tau_min"], self["tau_max"], self["aoa_a"], self["aoa_r0"])
        except ValueError as exc:
            raise ConfigError(f"{self.where('tau_min')}: {exc}") from None
        if self["sigma_db"] < 0:
            raise ConfigError(f"{self.where('sigma_db')}: sigma_db must be non-negative")
        try:
            return ChannelParams(self["K"], self["beta"], sigma_from_db(self["sigma_db"]), aoa)
        except ValueError as exc:
            key = "beta" if "beta" in str(exc) else "K"
            raise ConfigError(f"{self.where(key)}: {exc}") from None

    def model(self, intensity=None):
        """Deployment model; ``intensity`` overrides the target intensity (used on grids)."""
        kind = self["model"]
        d = self["dim"]
        if kind not in MODEL_KINDS:
            raise ConfigError(f"{self.where('model')}: unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
        target = intensity if intensity is not None else (self["target_lambda"] or self["lambda"])
        try:
            if kind == "ppp":
                model = PoissonProcess(_need(self, "lambda", target))
            elif kind == "ginibre":
                model = AlphaGinibre(self["alpha"], _need(self, "lambda", target), method=self["ginibre_method"])
            elif kind in ("matern1", "matern2"):
                cls = MaternI if kind == "matern1" else MaternII
                if intensity is None and self["lambda_p"] is not None:
                    model = cls(self["lambda_p"], self["rc"])
                else:
                    model = cls.matched(_need(self, "target_lambda", target), self["rc"], d)
            else:
                lp = _need(self, "lambda_p", self["lambda_p"])
                if intensity is None and self["cbar"] is not None:
                    cbar = self["cbar"]
                else:
                    cbar = _need(self, "lambda", target) / lp
                if kind == "mcp":
                    model = MaternCluster(lp, cbar, self["rc"])
                else:
                    model = ThomasCluster(lp, cbar, self["sigma_c"])
            model.validate(d)
        except ConfigError:
            raise
        except (ValueError, NotImplementedError) as exc:
            key = "dim" if isinstance(exc, NotImplementedError) else "model"
            raise ConfigError(f"{self.where(key)}: {exc}") from None
        return model

    def validate(self):
        if self["dim"] < 2:
            raise ConfigError(f"{self.where('dim')}: dim must be >= 2")
        if not self["radius"] > 0:
            raise ConfigError(f"{self.where('radius')}: radius must be positive")
        if self["reps"] < 1:
            raise ConfigError(f"{self.where('reps')}: reps must be >= 1")
        if self["threads"] < 1:
            raise ConfigError(f"{self.where('threads')}: threads must be >= 1")
        if self["n_cal"] < 2:
            raise ConfigError(f"{self.where('n_cal')}: n_cal must be >= 2")
        self.channel()
        if not self["grid"]:
            self.model()
        return self


def _need(cfg, key, value):
    if value is None:
        raise ConfigError(f"{cfg.where(key)}: model {cfg['model']!r} needs {key}")
    return value


def _coerce(parser, raw):
    if parser is _float_list:
        return tuple(float(v) for v in raw)
    if parser in (_opt_int, _opt_float):
        return None if raw is None else (int(raw) if parser is _opt_int else float(raw))
    return parser(raw)


def parse_text(text, source="<config>", cfg=None):
    cfg = cfg or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        origin = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{origin}: expected 'key = value', got {stripped!r}")
        key, value = (s.strip() for s in stripped.split("=", 1))
        cfg.set(key, value, origin)
    return cfg


def load(path=None, overrides=None):
    """Build a config from an optional file plus ``{key: raw_value}`` overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path) as fh:
            parse_text(fh.read(), str(path), cfg)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg.set(key, value, f"--{key.replace('_', '-')}")
    return cfg
