"""Technology selection and deployment planning for a hybrid QKD network.

Demands are classified into network segments by distance, filtered against
per-technology eligibility rules (fiber availability, line of sight,
transoceanic routes, untrusted-relay separation limits), then assigned the
technology that the deployment-strategy rules prefer: direct fiber for
access links, free-space optics for the fiber-less last mile, trusted-relay
fiber for metro and long haul, trusted-relay satellites for transoceanic
routes, untrusted satellites when end-to-end security without trusted nodes
is demanded.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from . import link_models as lm
from .relay_protocol import RelayKind


class PlannerError(ValueError):
    """Invalid planner input."""


class Segment(enum.Enum):
    ACCESS = "access"
    METRO = "metro"
    LONG_HAUL = "long_haul"
    INTERCONTINENTAL = "intercontinental"


class TechnologyKind(enum.Enum):
    FIBER_DIRECT = "fiber_direct"
    FIBER_TRUSTED_RELAY = "fiber_trusted_relay"
    FREE_SPACE_TERRESTRIAL = "free_space_terrestrial"
    SATELLITE_TRUSTED_RELAY = "satellite_trusted_relay"
    SATELLITE_UNTRUSTED = "satellite_untrusted"


@dataclass(frozen=True)
class TechnologyAttributes:
    topology: str  # "P2P" or "P2MP"
    requires_los: bool
    time_window: str  # "whole_day" or "night_burst"
    cost_tier: int  # ordinal 1 (cheapest) .. 4


TECH_ATTRIBUTES: dict[TechnologyKind, TechnologyAttributes] = {
    TechnologyKind.FIBER_DIRECT: TechnologyAttributes("P2MP", False, "whole_day", 1),
    TechnologyKind.FIBER_TRUSTED_RELAY: TechnologyAttributes("P2MP", False, "whole_day", 2),
    TechnologyKind.FREE_SPACE_TERRESTRIAL: TechnologyAttributes("P2P", True, "whole_day", 2),
    TechnologyKind.SATELLITE_TRUSTED_RELAY: TechnologyAttributes("P2P", True, "night_burst", 4),
    TechnologyKind.SATELLITE_UNTRUSTED: TechnologyAttributes("P2P", True, "night_burst", 4),
}

# Deterministic tie-break / preference order for the deployment strategy.
DEFAULT_PREFERENCE_ORDER: tuple[TechnologyKind, ...] = (
    TechnologyKind.FIBER_DIRECT,
    TechnologyKind.FREE_SPACE_TERRESTRIAL,
    TechnologyKind.FIBER_TRUSTED_RELAY,
    TechnologyKind.SATELLITE_TRUSTED_RELAY,
    TechnologyKind.SATELLITE_UNTRUSTED,
)

UNTRUSTED_KINDS = frozenset(
    {TechnologyKind.SATELLITE_UNTRUSTED}
)


@dataclass(frozen=True)
class Demand:
    """One end-to-end key demand between two named endpoints."""

    endpoint_a: str
    endpoint_b: str
    distance_km: float
    has_fiber: bool = False
    has_los: bool = False
    transoceanic: bool = False
    untrusted_required: bool = False

    def __post_init__(self) -> None:
        if self.distance_km <= 0:
            raise PlannerError("distance_km must be > 0")

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.endpoint_a, self.endpoint_b)


@dataclass(frozen=True)
class PlannerParams:
    max_fiber_direct_km: float = 100.0
    max_freespace_km: float = 10.0
    untrusted_max_separation_km: float = 1000.0
    max_span_km: float = 100.0
    satellite_altitude_km: float = 500.0
    source_rate_hz: float = 1e9
    sifting_factor: float = 0.5
    w_rate: float = 1.0
    w_cost: float = 0.1


@dataclass(frozen=True)
class PlanItem:
    """Chosen technology and supporting data for one demand."""

    demand: Demand
    technology: TechnologyKind
    relay_offsets_km: tuple[float, ...]
    relay_path: tuple[tuple[str, RelayKind], ...]
    budget: lm.LinkBudget
    key_rate_bps: float
    orbit_id: Optional[str] = None

    @property
    def endpoints(self) -> tuple[str, str]:
        return self.demand.endpoints


@dataclass(frozen=True)
class DeploymentPlan:
    items: tuple[PlanItem, ...]
    infeasible: tuple[tuple[Demand, str], ...] = ()

    @property
    def all_feasible(self) -> bool:
        return not self.infeasible


def plan_to_dict(plan: DeploymentPlan) -> dict:
    """JSON-ready form of a plan; stable field order, schema versioned."""
    return {
        "schema_version": 1,
        "items": [
            {
                "endpoints": list(item.endpoints),
                "demand": {
                    "a": item.demand.endpoint_a,
                    "b": item.demand.endpoint_b,
                    "distance_km": item.demand.distance_km,
                    "has_fiber": item.demand.has_fiber,
                    "has_los": item.demand.has_los,
                    "transoceanic": item.demand.transoceanic,
                    "untrusted_required": item.demand.untrusted_required,
                },
                "technology": item.technology.value,
                "relay_offsets_km": list(item.relay_offsets_km),
                "relay_path": [
                    {"id": node_id, "kind": kind.value}
                    for node_id, kind in item.relay_path
                ],
                "budget": item.budget.to_dict(),
                "key_rate_bps": item.key_rate_bps,
                "orbit_id": item.orbit_id,
            }
            for item in plan.items
        ],
        "infeasible": [
            {"endpoints": list(d.endpoints), "distance_km": d.distance_km, "reason": r}
            for d, r in plan.infeasible
        ],
    }


def plan_from_dict(data: dict) -> DeploymentPlan:
    """Rebuild a plan from its JSON form (infeasible entries are dropped)."""
    if data.get("schema_version") != 1:
        raise PlannerError("unsupported plan schema_version")
    items = []
    for entry in data["items"]:
        d = entry["demand"]
        demand = Demand(
            endpoint_a=d["a"],
            endpoint_b=d["b"],
            distance_km=float(d["distance_km"]),
            has_fiber=bool(d["has_fiber"]),
            has_los=bool(d["has_los"]),
            transoceanic=bool(d["transoceanic"]),
            untrusted_required=bool(d["untrusted_required"]),
        )
        items.append(
            PlanItem(
                demand=demand,
                technology=TechnologyKind(entry["technology"]),
                relay_offsets_km=tuple(float(x) for x in entry["relay_offsets_km"]),
                relay_path=tuple(
                    (node["id"], RelayKind(node["kind"]))
                    for node in entry["relay_path"]
                ),
                budget=lm.LinkBudget.from_dict(entry["budget"]),
                key_rate_bps=float(entry["key_rate_bps"]),
                orbit_id=entry.get("orbit_id"),
            )
        )
    return DeploymentPlan(items=tuple(items))


def classify_segment(distance_km: float) -> Segment:
    """Distance-based network segment, thresholds at 100 / 1000 / 5000 km.

    Lower bounds inclusive: 100 km is metro, 1000 km long haul, 5000 km
    intercontinental.
    """
    if distance_km <= 0:
        raise PlannerError("distance_km must be > 0")
    if distance_km < 100.0:
        return Segment.ACCESS
    if distance_km < 1000.0:
        return Segment.METRO
    if distance_km < 5000.0:
        return Segment.LONG_HAUL
    return Segment.INTERCONTINENTAL


def eligible_technologies(
    demand: Demand, params: PlannerParams = PlannerParams()
) -> set[TechnologyKind]:
    """Technologies that can serve a demand under the comparison-table rules."""
    out: set[TechnologyKind] = set()
    if demand.has_fiber and demand.distance_km <= params.max_fiber_direct_km:
        out.add(TechnologyKind.FIBER_DIRECT)
    if demand.has_los and demand.distance_km <= params.max_freespace_km:
        out.add(TechnologyKind.FREE_SPACE_TERRESTRIAL)
    if demand.has_fiber and not demand.transoceanic:
        out.add(TechnologyKind.FIBER_TRUSTED_RELAY)
    out.add(TechnologyKind.SATELLITE_TRUSTED_RELAY)
    if demand.distance_km <= params.untrusted_max_separation_km:
        out.add(TechnologyKind.SATELLITE_UNTRUSTED)
    if demand.untrusted_required:
        out &= UNTRUSTED_KINDS
    return out


def place_relays(route_length_km: float, max_span_km: float = 100.0) -> list[float]:
    """Minimal evenly spaced relay offsets so no span exceeds max_span_km."""
    if route_length_km <= 0 or max_span_km <= 0:
        raise PlannerError("route_length_km and max_span_km must be > 0")
    n_spans = math.ceil(route_length_km / max_span_km)
    n_relays = n_spans - 1
    spacing = route_length_km / n_spans
    return [spacing * (i + 1) for i in range(n_relays)]


def validate_relay_layout(
    route_length_km: float, relay_offsets_km: list[float], max_span_km: float = 100.0
) -> bool:
    """Check an externally supplied relay layout: ordered, in range, spans OK."""
    if route_length_km <= 0:
        raise PlannerError("route_length_km must be > 0")
    offsets = list(relay_offsets_km)
    if offsets != sorted(offsets):
        return False
    if offsets and (offsets[0] <= 0 or offsets[-1] >= route_length_km):
        return False
    boundaries = [0.0] + offsets + [route_length_km]
    spans = [b - a for a, b in zip(boundaries, boundaries[1:])]
    return all(s <= max_span_km + 1e-9 for s in spans)


def _relay_node_id(demand: Demand, index: int) -> str:
    return f"{demand.endpoint_a}~{demand.endpoint_b}:relay{index}"


def _satellite_node_id(demand: Demand) -> str:
    return f"{demand.endpoint_a}~{demand.endpoint_b}:sat"


def _budget_for(
    demand: Demand,
    tech: TechnologyKind,
    params: PlannerParams,
    fiber: lm.FiberParams,
    freespace: lm.FreeSpaceParams,
    sat: lm.SatLinkParams,
) -> tuple[lm.LinkBudget, tuple[float, ...]]:
    """Budget (per hop, for relayed technologies) and relay offsets."""
    if tech is TechnologyKind.FIBER_DIRECT:
        return lm.fiber_loss(demand.distance_km, fiber), ()
    if tech is TechnologyKind.FREE_SPACE_TERRESTRIAL:
        return lm.terrestrial_freespace_loss(demand.distance_km, freespace), ()
    if tech is TechnologyKind.FIBER_TRUSTED_RELAY:
        offsets = tuple(place_relays(demand.distance_km, params.max_span_km))
        span = demand.distance_km / (len(offsets) + 1)
        return lm.fiber_loss(span, fiber), offsets
    # Both satellite technologies: per-arm downlink at orbital altitude
    # (zenith range; pass geometry is handled by the simulator).
    down = lm.downlink_loss(params.satellite_altitude_km, sat)
    return down, ()


def _rate_for(
    demand: Demand, tech: TechnologyKind, budget: lm.LinkBudget, params: PlannerParams
) -> float:
    if tech is TechnologyKind.SATELLITE_UNTRUSTED:
        # Two arms; both photons must survive.
        return lm.key_rate_estimate(
            params.source_rate_hz,
            lm.combined_arm_loss(budget, budget),
            params.sifting_factor,
        )
    return lm.key_rate_estimate(
        params.source_rate_hz, budget.total_db, params.sifting_factor
    )


def rank_technologies(
    demand: Demand,
    budgets: dict[TechnologyKind, lm.LinkBudget],
    params: PlannerParams = PlannerParams(),
) -> list[TechnologyKind]:
    """Eligible technologies ordered by objective score, best first.

    Score = w_rate * log10(key rate) - w_cost * cost tier; ties fall back to
    the deployment-strategy preference order.
    """
    eligible = eligible_technologies(demand, params)
    missing = eligible - set(budgets)
    if missing:
        raise PlannerError(f"missing budgets for {sorted(t.value for t in missing)}")

    def score(tech: TechnologyKind) -> float:
        rate = _rate_for(demand, tech, budgets[tech], params)
        log_rate = math.log10(rate) if rate > 0 else -math.inf
        return params.w_rate * log_rate - params.w_cost * TECH_ATTRIBUTES[tech].cost_tier

    return sorted(
        eligible,
        key=lambda t: (-score(t), DEFAULT_PREFERENCE_ORDER.index(t)),
    )


def _preferred_technology(
    demand: Demand, eligible: set[TechnologyKind], params: PlannerParams
) -> TechnologyKind:
    """Deployment-strategy rule table; falls back to score ranking."""
    segment = classify_segment(demand.distance_km)
    if demand.untrusted_required:
        if TechnologyKind.SATELLITE_UNTRUSTED in eligible:
            return TechnologyKind.SATELLITE_UNTRUSTED
    elif segment is Segment.ACCESS and TechnologyKind.FIBER_DIRECT in eligible:
        return TechnologyKind.FIBER_DIRECT
    elif (
        demand.distance_km <= params.max_freespace_km
        and not demand.has_fiber
        and TechnologyKind.FREE_SPACE_TERRESTRIAL in eligible
    ):
        return TechnologyKind.FREE_SPACE_TERRESTRIAL
    elif (
        segment in (Segment.METRO, Segment.LONG_HAUL)
        and TechnologyKind.FIBER_TRUSTED_RELAY in eligible
    ):
        return TechnologyKind.FIBER_TRUSTED_RELAY
    elif (
        segment is Segment.INTERCONTINENTAL or demand.transoceanic
    ) and TechnologyKind.SATELLITE_TRUSTED_RELAY in eligible:
        return TechnologyKind.SATELLITE_TRUSTED_RELAY
    return next(iter(sorted(eligible, key=DEFAULT_PREFERENCE_ORDER.index)))


def select_deployment(
    demands: list[Demand],
    params: PlannerParams = PlannerParams(),
    fiber: lm.FiberParams = lm.FiberParams(),
    freespace: lm.FreeSpaceParams = lm.FreeSpaceParams(),
    sat: lm.SatLinkParams = lm.SatLinkParams(),
    orbit_id: Optional[str] = None,
) -> DeploymentPlan:
    """Plan every demand; demands with no eligible technology are reported.

    Deterministic: demands are planned independently and assembled in input
    order.
    """
    items: list[PlanItem] = []
    infeasible: list[tuple[Demand, str]] = []
    for demand in demands:
        eligible = eligible_technologies(demand, params)
        if not eligible:
            reason = "no eligible technology"
            if demand.untrusted_required:
                reason += (
                    f" (untrusted relaying limited to "
                    f"{params.untrusted_max_separation_km:g} km separation)"
                )
            infeasible.append((demand, reason))
            continue
        tech = _preferred_technology(demand, eligible, params)
        budget, offsets = _budget_for(demand, tech, params, fiber, freespace, sat)
        rate = _rate_for(demand, tech, budget, params)
        relay_path: tuple[tuple[str, RelayKind], ...] = ()
        item_orbit = None
        if tech is TechnologyKind.FIBER_TRUSTED_RELAY:
            relay_path = tuple(
                (_relay_node_id(demand, i), RelayKind.TRUSTED_NODE)
                for i in range(len(offsets))
            )
        elif tech is TechnologyKind.SATELLITE_TRUSTED_RELAY:
            relay_path = ((_satellite_node_id(demand), RelayKind.TRUSTED_SATELLITE),)
            item_orbit = orbit_id
        elif tech is TechnologyKind.SATELLITE_UNTRUSTED:
            relay_path = (
                (_satellite_node_id(demand), RelayKind.UNTRUSTED_ENTANGLEMENT_SATELLITE),
            )
            item_orbit = orbit_id
        items.append(
            PlanItem(
                demand=demand,
                technology=tech,
                relay_offsets_km=offsets,
                relay_path=relay_path,
                budget=budget,
                key_rate_bps=rate,
                orbit_id=item_orbit,
            )
        )
    return DeploymentPlan(items=tuple(items), infeasible=tuple(infeasible))
