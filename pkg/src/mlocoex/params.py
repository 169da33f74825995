"""Scenario, backoff and PHY/MAC timing parameters plus per-event durations.

All durations in this module are floating-point microseconds; the simulator
converts to integer nanoseconds at its boundary.
"""

import configparser
import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError

# Per-MPDU framing overhead inside an A-MPDU (delimiter + MAC header + FCS,
# rounded up for subframe padding), in bytes.
MPDU_OVERHEAD_B = 40


@dataclass(frozen=True)
class BackoffParams:
    w0: int = 16          # initial contention window of the multi-link devices
    m: int = 6            # maximum backoff stage
    cw_min_sld: int = 15  # legacy minimum contention window

    def __post_init__(self):
        if self.w0 < 2:
            raise ConfigError(f"w0 must be >= 2, got {self.w0}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.cw_min_sld < 1:
            raise ConfigError(f"cw_min_sld must be >= 1, got {self.cw_min_sld}")

    def w(self, i):
        """Contention window at backoff stage i: W_i = 2^i * W_0."""
        if not 0 <= i <= self.m:
            raise ConfigError(f"stage {i} outside [0, {self.m}]")
        return (1 << i) * self.w0


@dataclass(frozen=True)
class PhyParams:
    t_phy: float = 40.0    # PHY preamble + header [us]
    sigma: float = 13.6    # OFDM symbol duration [us]
    r_su: int = 5880       # data rate [bits/symbol], MCS 8 / 80 MHz / 1 SS
    n_a: int = 1           # aggregated MPDUs per A-MPDU
    l_d: int = 1500        # payload per MPDU [bytes]
    sifs: float = 16.0     # [us]
    t_ack: float = 32.0    # ACK frame duration [us]
    t_empty: float = 9.0   # empty slot duration [us]
    l_ampdu: int = 0       # total A-MPDU length [bits]; 0 derives it

    def __post_init__(self):
        for name in ("t_phy", "sigma", "sifs", "t_ack", "t_empty"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.r_su <= 0:
            raise ConfigError("r_su must be > 0")
        if self.n_a < 1 or self.l_d < 1:
            raise ConfigError("n_a and l_d must be >= 1")
        if self.l_ampdu == 0:
            object.__setattr__(
                self, "l_ampdu", self.n_a * (self.l_d + MPDU_OVERHEAD_B) * 8
            )
        if self.l_ampdu < self.n_a * self.l_d * 8:
            raise ConfigError("l_ampdu smaller than aggregate payload")

    @property
    def payload_bits(self):
        """Goodput bits carried by one A-MPDU."""
        return self.n_a * self.l_d * 8


@dataclass(frozen=True)
class SlotDurations:
    t_data: float       # [us]
    t_success: float    # [us]
    t_collision: float  # [us]
    t_empty: float      # [us]


@dataclass(frozen=True)
class ScenarioConfig:
    n_mld: int = 2
    n_sld: int = 2
    gamma: float | None = None  # None selects the population-proportional split
    backoff: BackoffParams = field(default_factory=BackoffParams)
    phy: PhyParams = field(default_factory=PhyParams)
    links: int = 2

    def __post_init__(self):
        if self.links != 2:
            raise ConfigError(f"only 2-link devices are modeled, got links={self.links}")
        if self.n_mld < 0 or self.n_sld < 0:
            raise ConfigError("population counts must be >= 0")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", self._proportional_gamma())
            object.__setattr__(self, "gamma_mode", "proportional")
        else:
            object.__setattr__(self, "gamma_mode", "fixed")

    def _proportional_gamma(self):
        total = self.n_mld + self.n_sld
        if total == 0:
            return 0.0
        return self.n_mld / total

    def with_na(self, n_a):
        """Copy of this scenario with a different aggregation level."""
        gamma = None if self.gamma_mode == "proportional" else self.gamma
        return replace(self, gamma=gamma, phy=replace(self.phy, n_a=n_a, l_ampdu=0))


def compute_t_data(phy):
    """Airtime of one A-MPDU: preamble plus whole OFDM symbols."""
    if phy.r_su <= 0:
        raise ConfigError("r_su must be > 0")
    return phy.t_phy + math.ceil(phy.l_ampdu / phy.r_su) * phy.sigma


def compute_slot_durations(phy):
    """Event durations for success, collision and empty slots."""
    t_data = compute_t_data(phy)
    return SlotDurations(
        t_data=t_data,
        t_success=t_data + 2.0 * phy.sifs + phy.t_ack,
        t_collision=t_data + phy.sifs,
        t_empty=phy.t_empty,
    )


_SCHEMA = {
    "scenario": {
        "n_mld": int,
        "n_sld": int,
        "gamma": float,
        "links": int,
    },
    "backoff": {
        "w0": int,
        "m": int,
        "cw_min_sld": int,
    },
    "phy": {
        "t_phy": float,
        "sigma": float,
        "r_su": int,
        "n_a": int,
        "l_d": int,
        "l_ampdu": int,
        "sifs": float,
        "t_ack": float,
        "t_empty": float,
    },
}


def _key_line(path, key):
    """Best-effort line number of a config key, for error messages."""
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
                if stripped.startswith(key) and "=" in stripped:
                    name = stripped.split("=", 1)[0].strip()
                    if name == key:
                        return lineno
    except OSError:
        pass
    return None


def load_config(path, overrides=None):
    """Parse an INI-style scenario file into a ScenarioConfig.

    Sections [scenario], [backoff] and [phy] are recognized; unknown sections
    or keys are a hard error. `overrides` maps dotted keys like "phy.n_a" or
    plain keys like "gamma" onto replacement values.
"""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    values = {"scenario": {}, "backoff": {}, "phy": {}}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                line = _key_line(path, key)
                where = f"{path}:{line}" if line else str(path)
                raise ConfigError(f"{where}: unknown key '{key}' in [{section}]")
            caster = _SCHEMA[section][key]
            try:
                values[section][key] = caster(raw)
            except ValueError as exc:
                line = _key_line(path, key)
                where = f"{path}:{line}" if line else str(path)
                raise ConfigError(f"{where}: bad value for '{key}': {raw!r}") from exc

    if overrides:
        for dotted, value in overrides.items():
            if "." in dotted:
                section, key = dotted.split(".", 1)
            else:
                section, key = _find_section(dotted), dotted
            if section not in _SCHEMA or key not in _SCHEMA[section]:
                raise ConfigError(f"unknown override '{dotted}'")
            values[section][key] = _SCHEMA[section][key](value)

    try:
        backoff = BackoffParams(**values["backoff"])
        phy = PhyParams(**values["phy"])
        return ScenarioConfig(backoff=backoff, phy=phy, **values["scenario"])
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _find_section(key):
    for section, keys in _SCHEMA.items():
        if key in keys:
            return section
    return "scenario"
