"""Campaign configuration: TOML (or the equivalent JSON) with line-numbered errors.

Schema::

    process = "independent"      # independent | field_based | general
    representation = "series"    # series | poisson (independent only)
    T = 1.0
    n_terms = 5000
    n_paths = 20000
    grid_points = 101
    seed = 2024
    output_dir = "out"           # default: $MULTISTABLE_OUT or ./multistable-out
    threads = 1

    [alpha]                      # see AlphaFunction.from_config
    kind = "affine"
    a0 = 1.2
    a1 = 0.3

    [kernel]                     # required for process = "general"
    name = "min"                 # indicator | min | zero
    p_exponent = 1.7

    [checks]                     # optional thresholds and test modes
    cf_threshold = 0.03
    ks_p_min = 0.01
    n_se = 3.0
    mismatch_alpha = { kind = "constant", a0 = 1.8 }

    [decompose]
    rule = "magnitude"           # magnitude | alternate | field_drift
    n_draws = 1

    [localize]
    u = 0.5
    r_values = [0.2, 0.05, 0.0125]
    probe_times = [0.5, 1.0]
"""
from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .alpha import AlphaDomainError, AlphaFunction
from .series import BUILTIN_KERNELS, Kernel

OUTPUT_ENV = "MULTISTABLE_OUT"
PROCESSES = {"independent": "LI", "field_based": "LF", "general": "GENERAL"}
DECOMPOSE_RULES = ("magnitude", "alternate", "field_drift")

_TOP_KEYS = {"process", "representation", "T", "n_terms", "n_paths", "grid_points", "seed",
             "output_dir", "threads", "alpha", "kernel", "checks", "decompose", "localize"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = f"{source or 'config'}"
        if line is not None:
            where += f", line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class CampaignConfig:
    process: str = "independent"
    alpha: dict = field(default_factory=lambda: {"kind": "affine", "a0": 1.2, "a1": 0.3})
    T: float = 1.0
    n_terms: int = 5000
    n_paths: int = 20_000
    grid_points: int = 101
    seed: int = 2024
    output_dir: str | None = None
    threads: int = 1
    representation: str = "series"
    kernel: dict | None = None
    checks: dict = field(default_factory=dict)
    decompose: dict = field(default_factory=dict)
    localize: dict = field(default_factory=dict)

    @property
    def process_kind(self) -> str:
        if self.process == "independent" and self.representation == "poisson":
            return "LI_poisson"
        return PROCESSES[self.process]

    def alpha_function(self) -> AlphaFunction:
        return AlphaFunction.from_config(self.alpha, self.T)

    def kernel_object(self) -> Kernel | None:
        if self.kernel is None:
            return None
        return BUILTIN_KERNELS[self.kernel["name"]](self.T, self.kernel.get("p_exponent", 1.7))

    def out_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "multistable-out")

    def to_dict(self) -> dict:
        return asdict(self)


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf'^[ \t]*"?{re.escape(key)}"?[ \t]*[=:]', re.M)
    m = pat.search(text)
    if m is None:
        pat = re.compile(rf'"{re.escape(key)}"\s*:')
        m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_config(text: str, fmt: str = "toml", source: str | None = None) -> CampaignConfig:
    """Parse and validate a campaign; every error names the offending line when known."""
    try:
        if fmt == "json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, source) from None
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), int(m.group(1)) if m else None, source) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a table", 1, source)

    def fail(msg, key):
        raise ConfigError(msg, _line_of(text, key), source)

    for key in raw:
        if key not in _TOP_KEYS:
            fail(f"unknown key {key!r}", key)
    cfg = CampaignConfig()
    for key, kind in (("process", str), ("representation", str), ("output_dir", str)):
        if key in raw:
            if not isinstance(raw[key], kind):
                fail(f"{key} must be a string", key)
            setattr(cfg, key, raw[key])
    for key in ("n_terms", "n_paths", "grid_points", "seed", "threads"):
        if key in raw:
            if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                fail(f"{key} must be an integer", key)
            setattr(cfg, key, raw[key])
    if "T" in raw:
        if not isinstance(raw["T"], (int, float)) or not raw["T"] > 0:
            fail("T must be a positive number", "T")
        cfg.T = float(raw["T"])
    for key in ("alpha", "kernel", "checks", "decompose", "localize"):
        if key in raw:
            if not isinstance(raw[key], dict):
                fail(f"[{key}] must be a table", key)
            setattr(cfg, key, dict(raw[key]))

    if cfg.process not in PROCESSES:
        fail(f"process must be one of {sorted(PROCESSES)}", "process")
    if cfg.representation not in ("series", "poisson"):
        fail("representation must be 'series' or 'poisson'", "representation")
    if cfg.representation == "poisson" and cfg.process != "independent":
        fail("the poisson representation exists for the independent process only",
             "representation")
    if cfg.n_terms < 1:
        fail("n_terms must be >= 1", "n_terms")
    if cfg.n_paths < 1:
        fail("n_paths must be >= 1", "n_paths")
    if cfg.grid_points < 2:
        fail("grid_points must be >= 2", "grid_points")
    if cfg.threads < 1:
        fail("threads must be >= 1", "threads")
    if cfg.seed < 0:
        fail("seed must be non-negative", "seed")
    try:
        cfg.alpha_function()
    except (AlphaDomainError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid [alpha]: {exc}", _line_of(text, "alpha"), source) from None
    if cfg.process == "general":
        if cfg.kernel is None:
            fail("process 'general' needs a [kernel] block", "process")
        if cfg.kernel.get("name") not in BUILTIN_KERNELS:
            fail(f"kernel name must be one of {sorted(BUILTIN_KERNELS)}", "kernel")
    for key, val in cfg.checks.items():
        if key == "mismatch_alpha":
            try:
                AlphaFunction.from_config(val, cfg.T)
            except (AlphaDomainError, ValueError, KeyError, TypeError) as exc:
                fail(f"invalid mismatch_alpha: {exc}", key)
        elif not isinstance(val, (int, float)) or not val > 0:
            fail(f"threshold {key} must be positive", key)
    rule = cfg.decompose.get("rule", "magnitude")
    if rule not in DECOMPOSE_RULES:
        fail(f"decompose rule must be one of {DECOMPOSE_RULES}", "rule")
    return cfg


def load_config(path: str | os.PathLike) -> CampaignConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_config(text, fmt, str(path))
