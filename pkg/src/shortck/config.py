"""Strict INI-style run configuration.

Sections [run], [sequence], [grid], [params]; `key = value` lines; `#` and
`;` start comments.  Every error names the offending line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

COMMANDS = ("basin", "potential", "green", "filtration", "region-test", "prop12", "disjoint",
            "avoid-variety", "fb-inclusion", "eta-check", "boundary", "stagewise", "levi")

SEQUENCE_KINDS = ("power_tower", "shifted_tower", "shift_like")
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# ---------------------------------------------------------------------------
# value types


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan not allowed")
    return v


def _complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean")


def _cvec(text: str) -> tuple:
    return tuple(_complex(x) for x in text.split(","))


def _fvec(text: str) -> tuple:
    return tuple(_float(x) for x in text.split(","))


def _ivec(text: str) -> tuple:
    return tuple(_int(x) for x in text.split(","))


def _str(text: str) -> str:
    return text.strip()


def _threads(text: str):
    t = text.strip().lower()
    if t == "auto":
        return "auto"
    v = int(t)
    if v < 1:
        raise ValueError("threads must be positive")
    return v


def _opt(conv):
    def f(text):
        return None if text.strip().lower() in ("auto", "none") else conv(text)
    f.__name__ = conv.__name__
    return f


TYPE_NAMES = {_int: "integer", _float: "real", _complex: "complex", _bool: "boolean", _cvec: "complex list",
              _fvec: "real list", _ivec: "integer list", _str: "string", _threads: "integer or auto"}


# (converter, default); REQUIRED marks a key without default
REQUIRED = object()

RUN_KEYS = {"command": (_str, REQUIRED), "seed": (_int, 0), "out_dir": (_str, "out"), "threads": (_threads, "auto")}

SEQUENCE_KEYS = {"kind": (_str, "power_tower"), "a": (_float, 0.5), "k": (_int, 3), "d": (_int, 2),
                 "n_max": (_int, 60), "nu": (_int, 1), "delta": (_complex, 1 + 0j)}

# sequence defaults that differ per command; explicit keys still win
SEQUENCE_OVERRIDES = {"green": {"kind": "shift_like", "nu": 2}, "eta-check": {"kind": "shifted_tower"}}

GRID_KEYS = {"width": (_int, 200), "height": (_int, 200), "base": (_cvec, None), "dir_u": (_cvec, None),
             "dir_v": (_cvec, None), "window": (_fvec, (-1.5, 1.5, -1.5, 1.5))}

PARAM_KEYS = {
    "basin": {"R": (_opt(_float), None), "c_in": (_float, 0.5), "classify_n_max": (_int, 60),
              "also_psi": (_bool, True), "psi_tol": (_float, 1e-10), "margin": (_float, 1e-3),
              "coherence_min": (_float, 0.995)},
    "potential": {"samples": (_int, 1000), "radius": (_float, 1.5), "n_hi": (_int, 30),
                  "envelope_tol": (_float, 1e-12), "psi_tol": (_float, 1e-10),
                  "subaverage_points": (_int, 50), "subaverage_radius": (_float, 0.05),
                  "circle_samples": (_int, 64), "subaverage_tol": (_float, 1e-6)},
    "green": {"R": (_float, 4.0), "samples": (_int, 1000), "n_hi": (_int, 5)},
    "filtration": {"R": (_opt(_float), None), "samples": (_int, 10**4), "steps": (_int, 20)},
    "region-test": {"alpha": (_complex, 0.5), "beta": (_complex, 1 / 9), "r": (_float, 4.0),
                    "M": (_int, 4), "p": (_ivec, (1,)), "q": (_ivec, (3,)), "length": (_int, 64)},
    "prop12": {"alpha": (_complex, 0.5), "beta": (_complex, 0.3), "kdeg": (_int, 2), "depth": (_int, 60),
               "N": (_int, 10**4), "schedules": (_int, 10), "schedule_length": (_int, 64),
               "bound_factor": (_float, 2.0)},
    "disjoint": {"samples": (_int, 10**5), "R": (_opt(_float), None), "n_classify": (_int, 200),
                 "undecided_max": (_float, 0.01)},
    "avoid-variety": {"R": (_float, 2.0), "epsilon": (_opt(_float), None), "samples": (_int, 10**4),
                      "basin_samples": (_int, 1000)},
    "fb-inclusion": {"samples": (_int, 1000), "tol": (_float, 1e-6)},
    "eta-check": {"M": (_float, 2.0), "n_hi": (_int, 40)},
    "boundary": {"eps": (_float, 0.1), "R": (_float, 5.0), "alpha": (_opt(_float), None), "n_xi": (_int, 64),
                 "n_w": (_int, 32), "face": (_int, 2), "angular_samples": (_int, 16)},
    "stagewise": {"R": (_float, 5.0), "eps": (_float, 0.1), "N": (_int, 6), "samples": (_int, 10**4),
                  "angular_samples": (_int, 16)},
    "levi": {"R": (_float, 5.0), "eps": (_float, 0.1), "N": (_int, 2), "samples": (_int, 20),
             "angular_samples": (_int, 16)},
}

SECTIONS = {"run": RUN_KEYS, "sequence": SEQUENCE_KEYS, "grid": GRID_KEYS}


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    out_dir: str = "out"
    threads: object = "auto"
    sequence: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """JSON-ready echo of every setting, defaults included."""

        def enc(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, tuple):
                return [enc(x) for x in v]
            return v

        return {"run": {"command": self.command, "seed": self.seed, "threads": self.threads},
                "sequence": {k: enc(v) for k, v in self.sequence.items()},
                "grid": {k: enc(v) for k, v in self.grid.items()},
                "params": {k: enc(v) for k, v in self.parameters.items()}}

    def to_text(self, include_out_dir: bool = True) -> str:
        """Config text that parses back to this config."""

        def show(v):
            if isinstance(v, tuple):
                return ", ".join(show(x) for x in v)
            if isinstance(v, complex):
                return repr(v).strip("()")
            if v is None:
                return "auto"
            return str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v)

        lines = ["[run]", f"command = {self.command}", f"seed = {self.seed}"]
        if include_out_dir:
            lines.append(f"out_dir = {self.out_dir}")
        lines += [f"threads = {self.threads}", "", "[sequence]"]
        lines += [f"{k} = {show(v)}" for k, v in self.sequence.items()]
        lines += ["", "[grid]"] + [f"{k} = {show(v)}" for k, v in self.grid.items()]
        lines += ["", "[params]"] + [f"{k} = {show(v)}" for k, v in self.parameters.items()]
        return "\n".join(lines) + "\n"


def _raw_sections(text: str):
    """{section: {key: (value text, line)}}, rejecting duplicates and stray lines."""
    out: dict = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", no)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS and section != "params":
                raise ConfigError(f"unknown section [{section}]", no)
            if section in out:
                raise ConfigError(f"duplicate section [{section}]", no)
            out[section] = {}
            continue
        if section is None:
            raise ConfigError("key outside any section", no)
        if "=" not in line:
            raise ConfigError("expected key = value", no)
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", no)
        if key in out[section]:
            first = out[section][key][1]
            raise ConfigError(f"duplicate key {key!r} (lines {first} and {no})", no)
        out[section][key] = (value, no)
    return out


def _fill(schema: dict, given: dict, section: str) -> dict:
    res = {}
    for key, (value, no) in given.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{section}]", no)
    for key, (conv, default) in schema.items():
        if key in given:
            value, no = given[key]
            try:
                res[key] = conv(value)
            except (ValueError, TypeError, OverflowError):
                name = TYPE_NAMES.get(conv, getattr(conv, "__name__", "value"))
                raise ConfigError(f"type mismatch for {key!r}: expected {name}, got {value!r}", no) from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        else:
            res[key] = default
    return res


def _line_of(raw: dict, section: str, key: str):
    return raw.get(section, {}).get(key, (None, None))[1]


def _validate(cfg: RunConfig, raw: dict):
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", _line_of(raw, "run", "command"))
    if not 0 <= cfg.seed <= U64_MAX:
        raise ConfigError("seed must be an unsigned 64-bit integer", _line_of(raw, "run", "seed"))
    sq = cfg.sequence

    def need(cond, msg, key, section="sequence"):
        if not cond:
            raise ConfigError(msg, _line_of(raw, section, key))

    need(sq["kind"] in SEQUENCE_KINDS, f"kind must be one of {', '.join(SEQUENCE_KINDS)}", "kind")
    need(0 < sq["a"] < 1, "a must lie in (0,1)", "a")
    need(2 <= sq["k"] <= 8, "k must lie in 2..8", "k")
    need(sq["d"] >= 2, "d must be at least 2", "d")
    need(sq["n_max"] >= 1, "n_max must be at least 1", "n_max")
    need(1 <= sq["nu"] <= sq["k"] - 1, "nu must lie in 1..k-1", "nu")
    need(sq["delta"] != 0, "delta must be nonzero", "delta")
    if sq["kind"] == "shifted_tower":
        need(sq["d"] == 2, "shifted tower requires d = 2", "d")
    g = cfg.grid
    need(g["width"] >= 1 and g["height"] >= 1, "grid must be at least 1x1", "width", "grid")
    need(len(g["window"]) == 4, "window needs four reals", "window", "grid")
    for key in ("base", "dir_u", "dir_v"):
        if g[key] is not None:
            need(len(g[key]) == sq["k"], f"{key} needs k = {sq['k']} entries", key, "grid")
    p = cfg.parameters
    for key in ("samples", "n_hi", "N", "depth", "schedules"):
        if key in p:
            need(p[key] >= 1, f"{key} must be positive", key, "params")


def parse_config(text: str) -> RunConfig:
    raw = _raw_sections(text)
    if "run" not in raw:
        raise ConfigError("missing section [run]")
    run = _fill(RUN_KEYS, raw["run"], "run")
    command = run["command"]
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", _line_of(raw, "run", "command"))
    schema = dict(SEQUENCE_KEYS)
    for key, v in SEQUENCE_OVERRIDES.get(command, {}).items():
        schema[key] = (schema[key][0], v)
    seq = _fill(schema, raw.get("sequence", {}), "sequence")
    grid = _fill(GRID_KEYS, raw.get("grid", {}), "grid")
    k = seq["k"]
    e = [0j] * k
    defaults = {"base": tuple(e), "dir_u": tuple(1 + 0j if i == 1 else 0j for i in range(k)),
                "dir_v": tuple(1 + 0j if i == (2 if k > 2 else 0) else 0j for i in range(k))}
    for key, v in defaults.items():
        if grid[key] is None:
            grid[key] = v
    params = _fill(PARAM_KEYS[command], raw.get("params", {}), "params")
    cfg = RunConfig(command, run["seed"], run["out_dir"], run["threads"], seq, grid, params)
    _validate(cfg, raw)
    return cfg
