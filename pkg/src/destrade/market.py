"""Combined heat-and-power market primitives.

Each community runs a distributed energy station (DES) around a
co-generation unit: a fraction eta_g of the fuel's heat value becomes
electricity, the remainder is recovered as usable heat with efficiency
eta_r.  The station splits each output stream between local use and
export.  Exports are bought by a per-city pair of aggregators (one for
electricity, one for heat) at wholesale prices and resold at fixed
retail rates.

Quantities are joules per day, prices are coin per joule, utilities and
profits are coin per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

# Shape constant of the log utility.  The adaption coefficients below are
# chosen so that consuming the full daily output pushes the log argument
# exactly to E, i.e. each satisfaction term tops out at its k coefficient.
E = math.e

# Open-interval margin for the satisfaction coefficient feasibility check.
K_MARGIN = 1e-9


class MarketError(ValueError):
    """Infeasible or inconsistent market parameters."""


# ============================================================
# parameter records
# ============================================================


@dataclass(frozen=True)
class ChpParams:
    """Co-generation unit parameters shared by every DES in a city.

    q       heat value of fuel, J per unit
    eta_g   fuel-to-electricity conversion efficiency, in (0, 1)
    eta_r   waste-heat recovery efficiency, in (0, 1]
    f_m     daily fuel burn, units of fuel
    c_f     fuel price, coin per unit
    """

    q: float
    eta_g: float
    eta_r: float
    f_m: float
    c_f: float

    def __post_init__(self):
        if self.q <= 0 or self.f_m <= 0 or self.c_f <= 0:
            raise MarketError("q, f_m and c_f must be positive")
        if not 0.0 < self.eta_g < 1.0:
            raise MarketError("eta_g must lie in (0, 1)")
        if not 0.0 < self.eta_r <= 1.0:
            raise MarketError("eta_r must lie in (0, 1]")

    @property
    def elec_capacity(self) -> float:
        """Daily electricity output at full burn, J."""
        return self.eta_g * self.q * self.f_m

    @property
    def heat_capacity(self) -> float:
        """Daily recovered-heat output at full burn, J."""
        return (1.0 - self.eta_g) * self.eta_r * self.q * self.f_m

    @property
    def c_e(self) -> float:
        """Generation cost of electricity, coin per J."""
        return self.c_f / self.q

    @property
    def c_h(self) -> float:
        """Generation cost of heat, coin per J; recovery losses included."""
        return self.c_f / (self.q * self.eta_r)

    @property
    def fuel_cost(self) -> float:
        """Total daily fuel bill, coin."""
        return self.c_f * self.f_m


def adaption_coefficients(chp: ChpParams) -> Tuple[float, float]:
    """Log-utility curvature scales (b_e, b_h) for a given unit size."""
    return (E - 1.0) / chp.elec_capacity, (E - 1.0) / chp.heat_capacity


@dataclass(frozen=True)
class CommunityParams:
    """Demand-side description of one community.

    k_e, k_h  satisfaction coefficients (coin) weighting local use
    m_min     daily floor on combined local use, J; 0 disables the floor
    b_e, b_h  adaption coefficients, derived from the unit size
    """

    k_e: float
    k_h: float
    m_min: float
    b_e: float
    b_h: float

    @classmethod
    def for_chp(cls, chp: ChpParams, k_e: float, k_h: float,
                m_min: float = 0.0) -> "CommunityParams":
        b_e, b_h = adaption_coefficients(chp)
        return cls(k_e=k_e, k_h=k_h, m_min=m_min, b_e=b_e, b_h=b_h)


@dataclass(frozen=True)
class PricePair:
    """Wholesale prices (p_e, p_h) offered by the aggregator pair.

    Carries no market context, so the retail/cost box is not checked
    here; equilibrium search deliberately probes one step outside it.
    Use CityMarket.validate_prices for box enforcement.
    """

    p_e: float
    p_h: float

    def __post_init__(self):
        if self.p_e <= 0 or self.p_h <= 0:
            raise MarketError("prices must be positive")


@dataclass(frozen=True)
class Dispatch:
    """Local-use fractions chosen by a DES: alpha for electricity, beta for heat."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.beta <= 1.0:
            raise MarketError("dispatch fractions must lie in [0, 1]")


@dataclass(frozen=True)
class EnergySplit:
    """Daily energy accounting for one DES, J."""

    e_use: float
    e_exc: float
    q_use: float
    q_exc: float


# ============================================================
# city assembly and validation
# ============================================================


@dataclass(frozen=True)
class CityMarket:
    """One city: a shared unit design, retail rates and the community list."""

    chp: ChpParams
    r_e: float
    r_h: float
    communities: Tuple[CommunityParams, ...]

    def __post_init__(self):
        if isinstance(self.communities, list):
            object.__setattr__(self, "communities", tuple(self.communities))
        if not self.communities:
            raise MarketError("a city needs at least one community")
        c_e, c_h = self.chp.c_e, self.chp.c_h
        if not c_e <= self.r_e < E * c_e:
            raise MarketError("r_e must satisfy c_e <= r_e < e*c_e")
        if not c_h <= self.r_h < E * c_h:
            raise MarketError("r_h must satisfy c_h <= r_h < e*c_h")
        (lo_e, hi_e), (lo_h, hi_h) = valid_k_intervals(self.chp, self.r_e, self.r_h)
        x, y = self.chp.elec_capacity, self.chp.heat_capacity
        for i, com in enumerate(self.communities):
            if not (lo_e * (1 + K_MARGIN) <= com.k_e <= hi_e * (1 - K_MARGIN)):
                raise MarketError(f"community {i}: k_e={com.k_e} outside ({lo_e}, {hi_e})")
            if not (lo_h * (1 + K_MARGIN) <= com.k_h <= hi_h * (1 - K_MARGIN)):
                raise MarketError(f"community {i}: k_h={com.k_h} outside ({lo_h}, {hi_h})")
            if com.m_min != 0.0 and not max(x, y) < com.m_min < x + y:
                raise MarketError(
                    f"community {i}: m_min={com.m_min} must be 0 or in (max(X,Y), X+Y)")

    def price_box(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Admissible wholesale range per stream: cost floor, retail ceiling."""
        return (self.chp.c_e, self.r_e), (self.chp.c_h, self.r_h)

    def validate_prices(self, p: PricePair) -> None:
        (lo_e, hi_e), (lo_h, hi_h) = self.price_box()
        if not lo_e <= p.p_e <= hi_e:
            raise MarketError(f"p_e={p.p_e} outside [{lo_e}, {hi_e}]")
        if not lo_h <= p.p_h <= hi_h:
            raise MarketError(f"p_h={p.p_h} outside [{lo_h}, {hi_h}]")


def valid_k_intervals(chp: ChpParams, r_e: float, r_h: float,
                      ) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Open intervals the satisfaction coefficients must lie in.

    The lower end keeps local use preferable to selling everything at
    retail; the upper end keeps full local use unprofitable at cost.
    Empty (infeasible) intervals raise MarketError.
    """
    x, y = chp.elec_capacity, chp.heat_capacity
    lo_e = r_e * x / (E - 1.0)
    hi_e = chp.c_e * x / (1.0 - 1.0 / E)
    lo_h = r_h * y / (E - 1.0)
    hi_h = chp.c_h * y / (1.0 - 1.0 / E)
    if lo_e >= hi_e or lo_h >= hi_h:
        raise MarketError("retail rate too high: no feasible satisfaction coefficients")
    return (lo_e, hi_e), (lo_h, hi_h)


# ============================================================
# accounting
# ============================================================


def energy_split(chp: ChpParams, d: Dispatch) -> EnergySplit:
    """Split daily output into local use and export for one dispatch."""
    x, y = chp.elec_capacity, chp.heat_capacity
    return EnergySplit(
        e_use=d.alpha * x,
        e_exc=(1.0 - d.alpha) * x,
        q_use=d.beta * y,
        q_exc=(1.0 - d.beta) * y,
    )


def des_utility(chp: ChpParams, com: CommunityParams, p: PricePair,
                d: Dispatch) -> float:
    """Daily community welfare: log satisfaction plus export revenue minus fuel."""
    s = energy_split(chp, d)
    return (com.k_e * math.log1p(com.b_e * s.e_use)
            + com.k_h * math.log1p(com.b_h * s.q_use)
            + p.p_e * s.e_exc + p.p_h * s.q_exc
            - chp.fuel_cost)


def aggregator_profits(city: CityMarket, p: PricePair,
                       dispatches: Sequence[Dispatch]) -> Tuple[float, float]:
    """Daily resale margins (electricity, heat) over all communities."""
    if len(dispatches) != len(city.communities):
        raise MarketError("one dispatch per community required")
    e_exc = 0.0
    q_exc = 0.0
    for d in dispatches:
        s = energy_split(city.chp, d)
        e_exc += s.e_exc
        q_exc += s.q_exc
    return (city.r_e - p.p_e) * e_exc, (city.r_h - p.p_h) * q_exc
