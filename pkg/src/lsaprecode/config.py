"""Scenario configuration: one JSON key per field, with validation."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .metrics import parse_approach

APPROACHES = ("proposed", "zf", "mf", "tpe")
INIT_MODES = ("oracle", "order_recursion")


@dataclass(frozen=True)
class ScenarioConfig:
    """All parameters of one simulated scenario.

    Defaults are the full-scale setup: 100 antennas, 10 users, 512-point
    FFT with 300 data subcarriers at 15 kHz, 14 blocks per frame, ETU taps.
    """

    M: int = 100
    P: int = 10
    K: int = 512
    active_subcarriers: int = 300
    cp_len: int = 40
    L: int = 38
    pdp: str = "etu"
    blocks_per_frame: int = 14
    delta_f: float = 15e3
    fd_hz: float = 0.0
    D: float | None = None           # ULA size in wavelengths; None -> independent antennas
    sigma_h2: float = 0.0
    gains: tuple | None = None
    esn0_db: tuple = (10.0,)
    approach: str = "proposed"       # proposed | zf(B) | mf | tpe(Q)
    mu: float | str = "auto"         # "auto" picks the rule matching D and sigma_h2
    init_mode: str = "oracle"        # oracle | order_recursion
    init_q: int = 2
    window: int | None = None        # filter half-window; None -> L
    untruncated: bool = False
    trials: int = 1
    seed: int = 0
    reinit_period: int | None = None
    scenario_id: str = "custom"

    def __post_init__(self):
        self.validate()

    # -- derived ------------------------------------------------------------
    @property
    def N(self):
        return self.blocks_per_frame

    @property
    def T(self):
        return 1.0 / self.delta_f

    @property
    def sample_rate(self):
        return self.K * self.delta_f

    @property
    def half_window(self):
        if self.untruncated:
            return None
        return self.L if self.window is None else self.window

    @property
    def approach_name(self):
        return parse_approach(self.approach)[0]

    @property
    def approach_arg(self):
        return parse_approach(self.approach)[1]

    @property
    def independent(self):
        return self.D is None

    # -- validation ---------------------------------------------------------
    def validate(self):
        def need(cond, fieldname, msg):
            if not cond:
                raise ConfigError(f"{fieldname}: {msg}")

        need(isinstance(self.M, int) and self.M >= 1, "M", "must be a positive integer")
        need(isinstance(self.P, int) and 1 <= self.P <= self.M, "P", "must satisfy 1 <= P <= M")
        need(isinstance(self.K, int) and self.K >= 2 and self.K & (self.K - 1) == 0,
             "K", "must be a power of two")
        need(1 <= self.active_subcarriers <= self.K - 1 and self.active_subcarriers % 2 == 0,
             "active_subcarriers", "must be even and below K (DC is left empty)")
        need(self.L >= 1 and self.L <= self.K, "L", "must be in 1..K")
        need(self.cp_len >= 0, "cp_len", "must be >= 0")
        need(self.blocks_per_frame >= 1, "blocks_per_frame", "must be >= 1")
        need(self.delta_f > 0, "delta_f", "must be positive")
        need(self.fd_hz >= 0, "fd_hz", "must be >= 0")
        need(self.D is None or self.D >= 0, "D", "must be >= 0 or null")
        need(self.sigma_h2 >= 0, "sigma_h2", "must be >= 0")
        need(self.trials >= 1, "trials", "must be >= 1")
        need(self.init_q >= 0, "init_q", "must be >= 0")
        need(self.init_mode in INIT_MODES, "init_mode", f"must be one of {INIT_MODES}")
        need(self.window is None or self.window >= 0, "window", "must be >= 0")
        need(self.reinit_period is None or self.reinit_period >= 1, "reinit_period", "must be >= 1")
        need(self.gains is None or (len(self.gains) == self.P and all(g > 0 for g in self.gains)),
             "gains", "must list P positive values")
        need(len(self.esn0_db) >= 1, "esn0_db", "must contain at least one point")
        need(isinstance(self.mu, (int, float)) and self.mu > 0 or self.mu == "auto",
             "mu", "must be 'auto' or a positive number")
        try:
            name, arg = parse_approach(self.approach)
        except ValueError:
            raise ConfigError(f"approach: cannot parse {self.approach!r}") from None
        need(name in APPROACHES, "approach", f"must be one of {APPROACHES}")
        if name == "zf":
            need(arg is None or arg >= 1, "approach", "zf(B) needs B >= 1")
        if name == "tpe":
            need(arg is None or arg >= 0, "approach", "tpe(Q) needs Q >= 0")

    # -- (de)serialization --------------------------------------------------
    def to_dict(self):
        d = dataclasses.asdict(self)
        d["esn0_db"] = list(self.esn0_db)
        if self.gains is not None:
            d["gains"] = list(self.gains)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "esn0_db" in data:
            v = data["esn0_db"]
            data["esn0_db"] = tuple(v) if isinstance(v, (list, tuple)) else (float(v),)
        if data.get("gains") is not None:
            data["gains"] = tuple(data["gains"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)
