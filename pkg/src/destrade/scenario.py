"""Scenario files: a small INI-like format driving the CLI.

Sections are [market], [communities] (repeatable, one per community),
[consensus], [faults] and [run]; entries are key = value lines, with
'#' comments.  configparser cannot express the repeated community
sections, hence the hand-rolled reader.  Parse errors carry the line
number and section so a typo is findable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .consensus import Behavior, FaultProfile
from .equilibrium import NeConfig
from .market import ChpParams, CityMarket, CommunityParams, PricePair

_SCALAR_SECTIONS = ("market", "consensus", "faults", "run")

_KNOWN_KEYS = {
    "market": {"q", "eta_g", "eta_r", "f_m", "c_f", "r_e", "r_h"},
    "communities": {"k_e", "k_h", "m_min"},
    "consensus": {"n_nodes", "rounds", "delta1", "delta2",
                  "delay_min", "delay_max"},
    "faults": {"dissenters", "silent_leaders", "invalid_leaders",
               "equivocators", "drop_prob"},
    "run": {"seed", "delta0", "decay", "init", "max_iters", "days",
            "cities", "funding"},
}

_REQUIRED_MARKET = ("q", "eta_g", "eta_r", "f_m", "c_f", "r_e", "r_h")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    """Raw key/value view of one scenario file."""

    market: Dict[str, str] = field(default_factory=dict)
    communities: List[Dict[str, str]] = field(default_factory=list)
    consensus: Dict[str, str] = field(default_factory=dict)
    faults: Dict[str, str] = field(default_factory=dict)
    run: Dict[str, str] = field(default_factory=dict)


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    current: Optional[Dict[str, str]] = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name == "communities":
                current = {}
                sc.communities.append(current)
            elif name in _SCALAR_SECTIONS:
                section = getattr(sc, name)
                if section:
                    raise ScenarioError(f"line {lineno}: duplicate section [{name}]")
                current = section
            else:
                raise ScenarioError(f"line {lineno}: unknown section [{name}]")
            current_name = name
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ScenarioError(f"line {lineno}: entry before any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS[current_name]:
            raise ScenarioError(
                f"line {lineno}: unknown key {key!r} in section [{current_name}]")
        if key in current:
            raise ScenarioError(
                f"line {lineno}: duplicate key {key!r} in section [{current_name}]")
        current[key] = value
    return sc


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    try:
        return parse_scenario(text)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


# ============================================================
# typed accessors
# ============================================================


def _as_float(section: Dict[str, str], name: str, key: str,
              default: Optional[float] = None) -> float:
    if key not in section:
        if default is None:
            raise ScenarioError(f"section [{name}] is missing {key!r}")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ScenarioError(
            f"section [{name}]: {key} = {section[key]!r} is not a number") from None


def _as_int(section: Dict[str, str], name: str, key: str,
            default: Optional[int] = None) -> int:
    v = _as_float(section, name, key, default)
    if v != int(v):
        raise ScenarioError(f"section [{name}]: {key} must be an integer")
    return int(v)


def build_city(sc: Scenario) -> CityMarket:
    for key in _REQUIRED_MARKET:
        if key not in sc.market:
            raise ScenarioError(f"section [market] is missing {key!r}")
    chp = ChpParams(
        q=_as_float(sc.market, "market", "q"),
        eta_g=_as_float(sc.market, "market", "eta_g"),
        eta_r=_as_float(sc.market, "market", "eta_r"),
        f_m=_as_float(sc.market, "market", "f_m"),
        c_f=_as_float(sc.market, "market", "c_f"),
    )
    if not sc.communities:
        raise ScenarioError("at least one [communities] section is required")
    communities = []
    for i, com in enumerate(sc.communities):
        communities.append(CommunityParams.for_chp(
            chp,
            k_e=_as_float(com, f"communities #{i}", "k_e"),
            k_h=_as_float(com, f"communities #{i}", "k_h"),
            m_min=_as_float(com, f"communities #{i}", "m_min", 0.0),
        ))
    return CityMarket(
        chp=chp,
        r_e=_as_float(sc.market, "market", "r_e"),
        r_h=_as_float(sc.market, "market", "r_h"),
        communities=tuple(communities),
    )


def build_ne_config(sc: Scenario) -> NeConfig:
    init: Union[str, PricePair] = sc.run.get("init", "low").strip()
    if isinstance(init, str) and " " in init:
        parts = init.split()
        if len(parts) != 2:
            raise ScenarioError(f"init = {init!r}: expected 'p_e p_h' or a keyword")
        try:
            init = PricePair(float(parts[0]), float(parts[1]))
        except ValueError:
            raise ScenarioError(f"init = {init!r}: prices must be numbers") from None
    return NeConfig(
        delta0=_as_float(sc.run, "run", "delta0", 1e-10),
        decay=_as_float(sc.run, "run", "decay", 0.999),
        init=init,
        max_iters=_as_int(sc.run, "run", "max_iters", 50000),
    )


@dataclass
class ConsensusSetup:
    node_ids: List[str]
    profile: FaultProfile
    rounds: int
    delta1: float
    delta2: float


def build_consensus(sc: Scenario) -> ConsensusSetup:
    n = _as_int(sc.consensus, "consensus", "n_nodes", 20)
    rounds = _as_int(sc.consensus, "consensus", "rounds", 1000)
    ids = [f"n{i:02d}" for i in range(n)]
    counts = [
        (Behavior.DISSENTER, _as_int(sc.faults, "faults", "dissenters", 0)),
        (Behavior.SILENT_LEADER, _as_int(sc.faults, "faults", "silent_leaders", 0)),
        (Behavior.INVALID_BLOCK_LEADER, _as_int(sc.faults, "faults",
                                                "invalid_leaders", 0)),
        (Behavior.EQUIVOCATOR, _as_int(sc.faults, "faults", "equivocators", 0)),
    ]
    behaviors: Dict[str, Behavior] = {}
    cursor = 0
    for beh, count in counts:
        for _ in range(count):
            if cursor >= n:
                raise ScenarioError("more faulty nodes than nodes")
            behaviors[ids[cursor]] = beh
            cursor += 1
    profile = FaultProfile(
        behaviors=behaviors,
        drop_prob=_as_float(sc.faults, "faults", "drop_prob", 0.0),
        delay=(_as_int(sc.consensus, "consensus", "delay_min", 1),
               _as_int(sc.consensus, "consensus", "delay_max", 5)),
    )
    return ConsensusSetup(
        node_ids=ids,
        profile=profile,
        rounds=rounds,
        delta1=_as_float(sc.consensus, "consensus", "delta1", 0.05),
        delta2=_as_float(sc.consensus, "consensus", "delta2", 0.02),
    )
