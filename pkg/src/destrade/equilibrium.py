"""Equilibrium search over the two wholesale prices.

Both aggregators take turns each iteration: probe one step up and one
step down in their own price at the current step size, keep the better
move (ties prefer up, then down, then stay), clamp the new price to the
cost/retail interval, then shrink the step geometrically.  The search
stops the first iteration neither price changes, which pins the fixed
point to within the final step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .follower import KktSolution
from .leader import city_responses, profit_e, profit_h
from .market import CityMarket, MarketError, PricePair, des_utility

INIT_CHOICES = ("low", "high", "mid")


class NoFixedPoint(RuntimeError):
    """Iteration budget exhausted before both prices went quiet."""

    def __init__(self, msg: str, trace: "NeTrace"):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class NeConfig:
    """Search knobs.

    init is one of "low" (cost corner), "high" (retail corner), "mid",
    or an explicit PricePair.
    """

    delta0: float = 1e-10
    decay: float = 0.999
    init: Union[str, PricePair] = "low"
    max_iters: int = 50000
    record_trace: bool = True

    def __post_init__(self):
        if self.delta0 <= 0:
            raise MarketError("delta0 must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise MarketError("decay must lie in (0, 1]")
        if isinstance(self.init, str) and self.init not in INIT_CHOICES:
            raise MarketError(f"init must be a PricePair or one of {INIT_CHOICES}")


@dataclass(frozen=True)
class NeStep:
    iteration: int
    p_e: float
    p_h: float
    v_e: float
    v_h: float
    delta: float


@dataclass
class NeTrace:
    """Per-iteration record of the search path."""

    steps: List[NeStep] = field(default_factory=list)
    iterations: int = 0

    @property
    def delta_final(self) -> float:
        """Step size in force on the terminating iteration."""
        if not self.steps:
            raise ValueError("empty trace")
        return self.steps[-1].delta


def resolve_init(city: CityMarket, init: Union[str, PricePair]) -> PricePair:
    (lo_e, hi_e), (lo_h, hi_h) = city.price_box()
    if isinstance(init, PricePair):
        city.validate_prices(init)
        return init
    if init == "low":
        return PricePair(lo_e, lo_h)
    if init == "high":
        return PricePair(hi_e, hi_h)
    if init == "mid":
        return PricePair(0.5 * (lo_e + hi_e), 0.5 * (lo_h + hi_h))
    raise MarketError(f"unknown init {init!r}")


def ea_step(city: CityMarket, p_e: float, p_h: float, delta: float) -> float:
    """One electricity-side move; probes are unclamped, the move is not."""
    lo, hi = city.price_box()[0]
    v0 = profit_e(city, PricePair(p_e, p_h))
    vp = profit_e(city, PricePair(p_e + delta, p_h))
    vm = profit_e(city, PricePair(p_e - delta, p_h))
    if vp >= v0 and vp >= vm:
        return min(hi, p_e + delta)
    if vm >= v0 and vm > vp:
        return max(lo, p_e - delta)
    return p_e


def ha_step(city: CityMarket, p_e: float, p_h: float, delta: float) -> float:
    """One heat-side move, evaluated after the electricity move."""
    lo, hi = city.price_box()[1]
    v0 = profit_h(city, PricePair(p_e, p_h))
    vp = profit_h(city, PricePair(p_e, p_h + delta))
    vm = profit_h(city, PricePair(p_e, p_h - delta))
    if vp >= v0 and vp >= vm:
        return min(hi, p_h + delta)
    if vm >= v0 and vm > vp:
        return max(lo, p_h - delta)
    return p_h


def find_ne(city: CityMarket, cfg: NeConfig = NeConfig(),
            ) -> Tuple[PricePair, NeTrace]:
    """Walk both prices to a joint fixed point of the +/- delta moves."""
    start = resolve_init(city, cfg.init)
    p_e, p_h = start.p_e, start.p_h
    delta = cfg.delta0
    trace = NeTrace()
    for it in range(cfg.max_iters):
        before = (p_e, p_h)
        p_e = ea_step(city, p_e, p_h, delta)
        p_h = ha_step(city, p_e, p_h, delta)
        trace.iterations = it + 1
        if cfg.record_trace:
            pair = PricePair(p_e, p_h)
            trace.steps.append(NeStep(it, p_e, p_h,
                                      profit_e(city, pair), profit_h(city, pair),
                                      delta))
        if (p_e, p_h) == before:
            if not cfg.record_trace:
                pair = PricePair(p_e, p_h)
                trace.steps.append(NeStep(it, p_e, p_h,
                                          profit_e(city, pair), profit_h(city, pair),
                                          delta))
            return PricePair(p_e, p_h), trace
        delta *= cfg.decay
    raise NoFixedPoint(f"no fixed point after {cfg.max_iters} iterations", trace)


@dataclass(frozen=True)
class SeOutcome:
    """Equilibrium prices with the induced dispatches and payoffs."""

    prices: PricePair
    responses: Tuple[KktSolution, ...]
    utilities: Tuple[float, ...]
    v_e: float
    v_h: float


def stackelberg_outcome(city: CityMarket, cfg: NeConfig = NeConfig(),
                        ) -> Tuple[SeOutcome, NeTrace]:
    """Run the price search and evaluate everyone at the fixed point."""
    prices, trace = find_ne(city, cfg)
    responses = tuple(city_responses(city, prices))
    utilities = tuple(
        des_utility(city.chp, com, prices, sol.dispatch)
        for com, sol in zip(city.communities, responses))
    return SeOutcome(
        prices=prices,
        responses=responses,
        utilities=utilities,
        v_e=profit_e(city, prices, responses),
        v_h=profit_h(city, prices, responses),
    ), trace
