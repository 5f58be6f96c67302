"""Shared domain types, scenario validation and the flat key/value config format."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class Scheme(str, enum.Enum):
    NONCODING = "noncoding"
    CODING = "coding"


@dataclass(frozen=True)
class PhyMacParams:
    """802.11b DSSS defaults at 2 Mb/s with 1000-byte datagrams.

    Durations are seconds, lengths bits, rates bits/second.
    """

    slot: float = 20e-6
    difs: float = 50e-6
    sifs: float = 10e-6
    cw_min: int = 32
    cw_max: int = 1024
    beta: int = 7
    link_rate: float = 2e6
    packet_len: int = 8000
    ack_len: int = 112
    delta: float = 2e-6
    bit_error_rate: float = 2e-6
    interference_hops: int = 1
    carrier_sense_hops: int = 2

    @property
    def packet_error(self) -> float:
        return self.bit_error_rate * self.packet_len


@dataclass(frozen=True)
class ChainScenario:
    k: int = 5
    gamma_1: float = 20.0
    gamma_k: float = 20.0
    phy: PhyMacParams = field(default_factory=PhyMacParams)
    scheme: Scheme = Scheme.NONCODING
    retransmission_enabled: bool = True

    @property
    def beta(self) -> int:
        """Per-hop transmission budget actually in force."""
        return self.phy.beta if self.retransmission_enabled else 1

    def with_gamma(self, gamma: float) -> "ChainScenario":
        return replace(self, gamma_1=gamma, gamma_k=gamma)

    def with_phy(self, **changes) -> "ChainScenario":
        return replace(self, phy=replace(self.phy, **changes))


@dataclass(frozen=True)
class DerivedTimes:
    t_data: float
    t_ack: float
    t_trans: float


def derived_times(phy: PhyMacParams) -> DerivedTimes:
    t_data = phy.packet_len / phy.link_rate
    t_ack = phy.ack_len / phy.link_rate
    return DerivedTimes(t_data, t_ack, t_data + t_ack + phy.sifs)


@dataclass(frozen=True)
class NodeRates:
    """Steady-state rates at one node (packets/s) and its service figures.

    ``lambda_f1``/``lambda_f2`` are encoder arrivals per flow, the ``lambda_n*``
    and ``lambda_c`` fields are queue arrivals, ``lambda_in_*`` are over-the-air
    inputs. In the non-coding scheme the native queue carries everything.
    """

    node: int
    lambda_f1: float = 0.0
    lambda_f2: float = 0.0
    lambda_n1: float = 0.0
    lambda_n2: float = 0.0
    lambda_c: float = 0.0
    lambda_in_n1: float = 0.0
    lambda_in_n2: float = 0.0
    lambda_in_c1: float = 0.0
    lambda_in_c2: float = 0.0
    mu_n: float = math.inf
    mu_c: float = math.inf
    mu_n_seen: float = math.inf
    rho_n: float = 0.0
    rho_c: float = 0.0
    w_node: float = 0.0

    def __post_init__(self):
        # solver outputs arrive as numpy scalars; keep the value types plain
        for f in fields(self)[1:]:
            object.__setattr__(self, f.name, float(getattr(self, f.name)))

    @property
    def attempt_rate(self) -> float:
        return self.lambda_n1 + self.lambda_n2 + self.lambda_c

    @property
    def stable(self) -> bool:
        return self.rho_n + self.rho_c < 1.0


@dataclass(frozen=True)
class PerformanceReport:
    scheme: Scheme
    theta: float
    w_flow1: float
    w_flow2: float
    w_avg: float
    nodes: tuple[NodeRates, ...]
    stable: bool
    converged: bool
    iterations: int
    residual: float

    def __post_init__(self):
        for name in ("theta", "w_flow1", "w_flow2", "w_avg", "residual"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def max_utilization(self) -> float:
        return max(n.rho_n + n.rho_c for n in self.nodes)


@dataclass
class SimResult:
    seed: int
    duration: float
    generated_f1: int = 0
    generated_f2: int = 0
    delivered_f1: int = 0
    delivered_f2: int = 0
    dropped: int = 0
    dropped_f1: int = 0
    dropped_f2: int = 0
    in_flight_f1: int = 0
    in_flight_f2: int = 0
    measured_theta: float = 0.0
    measured_delay_mean: float | None = None
    delay_f1_mean: float | None = None
    delay_f2_mean: float | None = None
    delay_samples: int = 0
    coded_tx_count: int = 0
    undecodable: int = 0
    tx_count: list[int] = field(default_factory=list)
    collision_count: list[int] = field(default_factory=list)
    retransmission_count: list[int] = field(default_factory=list)
    link_attempts: dict = field(default_factory=dict)
    link_successes: dict = field(default_factory=dict)
    hop_drops: dict = field(default_factory=dict)
    hop_packets: dict = field(default_factory=dict)
    queue_mean_q2: list[float] = field(default_factory=list)
    queue_mean_q3: list[float] = field(default_factory=list)
    queue_mean_q4: list[float] = field(default_factory=list)

    @property
    def delivered(self) -> int:
        return self.delivered_f1 + self.delivered_f2

    @property
    def queue_growing(self) -> bool:
        """Long-run occupancy check: queues still filling over the second half of the run."""
        for early, late in zip(self.queue_mean_q3, self.queue_mean_q4):
            if late > 1.2 * early and late - early > 1.0:
                return True
        return False


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def validate(scenario: ChainScenario) -> list[str]:
    """Return every violated invariant; an empty list means the scenario is usable."""
    out = []
    phy = scenario.phy
    if scenario.k < 3:
        out.append("k must be ≥ 3")
    if scenario.gamma_1 < 0:
        out.append("gamma_1 must be ≥ 0")
    if scenario.gamma_k < 0:
        out.append("gamma_k must be ≥ 0")
    if not isinstance(scenario.scheme, Scheme):
        out.append("scheme must be noncoding or coding")
    for name in ("slot", "difs", "sifs", "link_rate", "delta"):
        if not getattr(phy, name) > 0:
            out.append(f"{name} must be > 0")
    for name in ("packet_len", "ack_len"):
        if not getattr(phy, name) > 0:
            out.append(f"{name} must be > 0")
    if not (_is_pow2(phy.cw_min) and _is_pow2(phy.cw_max)):
        out.append("cw_min and cw_max must be powers of two")
    if phy.cw_min > phy.cw_max:
        out.append("cw_min must be ≤ cw_max")
    if phy.beta < 1:
        out.append("beta must be ≥ 1")
    if phy.bit_error_rate < 0:
        out.append("bit_error_rate must be ≥ 0")
    elif phy.packet_error >= 1:
        out.append("p_e·L_p ≥ 1")
    if phy.interference_hops < 1:
        out.append("interference_hops must be ≥ 1")
    if phy.carrier_sense_hops < 1:
        out.append("carrier_sense_hops must be ≥ 1")
    return out


class ConfigError(ValueError):
    pass


_PHY_FIELDS = {f.name: f.type for f in fields(PhyMacParams)}
_SCENARIO_KEYS = ("k", "gamma_1", "gamma_k", "scheme", "retransmission_enabled")
_INT_KEYS = {"k", "cw_min", "cw_max", "beta", "packet_len", "ack_len",
             "interference_hops", "carrier_sense_hops"}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def dumps(scenario: ChainScenario) -> str:
    lines = [f"{key} = {_format_value(getattr(scenario, key))}" for key in _SCENARIO_KEYS]
    lines += [f"{key} = {_format_value(val)}" for key, val in asdict(scenario.phy).items()]
    return "\n".join(lines) + "\n"


def loads(text: str, base: ChainScenario | None = None) -> ChainScenario:
    """Parse ``key = value`` lines; unknown keys and malformed values raise ConfigError.

    Keys not present keep their value from ``base`` (defaults when omitted).
    """
    base = base or ChainScenario()
    top: dict = {}
    phy: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "scheme":
                top[key] = Scheme(value.lower())
            elif key == "retransmission_enabled":
                top[key] = _parse_bool(value)
            elif key in _INT_KEYS:
                parsed = int(value)
                (top if key == "k" else phy)[key] = parsed
            elif key in _SCENARIO_KEYS:
                top[key] = float(value)
            elif key in _PHY_FIELDS:
                phy[key] = float(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    scenario = replace(base, phy=replace(base.phy, **phy), **top)
    for value in (scenario.gamma_1, scenario.gamma_k):
        if not math.isfinite(value):
            raise ConfigError("generation rates must be finite")
    return scenario


def load(path: str | Path, base: ChainScenario | None = None) -> ChainScenario:
    return loads(Path(path).read_text(), base)


def dump(scenario: ChainScenario, path: str | Path) -> None:
    Path(path).write_text(dumps(scenario))
