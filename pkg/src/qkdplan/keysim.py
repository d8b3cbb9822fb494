"""Deterministic discrete-event simulation of key generation and consumption.

Terrestrial links accrue key bits continuously; satellite links accrue only
inside their (night-gated) pass windows.  Trusted-relay chains turn segment
key bits into end-to-end blocks all-or-nothing, logging the parity
announcements so compromise scenarios can be audited afterwards.  Secure
sites dispense one-time-use key blocks to mobile users, who burn through
their balance off-site and refill on their next request.

All accounting is integer bits; generated = consumed + available holds for
every pool at every event boundary, exactly.  Runs are reproducible: the
event queue orders ties by sequence number and the only randomness is the
optional Poisson generation mode driven by the seed.
"""
from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .planner import DeploymentPlan, PlanItem, TechnologyKind


class SimError(ValueError):
    """Invalid simulation input."""


class InsufficientKeyError(RuntimeError):
    """A pool cannot supply the requested block; nothing was consumed."""


class EventKind(enum.Enum):
    GENERATION_TICK = "generation_tick"
    PASS_START = "pass_start"
    PASS_END = "pass_end"
    CONSUME_REQUEST = "consume_request"
    DISPENSE_REQUEST = "dispense_request"
    RELAY_ANNOUNCE = "relay_announce"


# Windows are half-open (start, end]: a tick at time T accrues for the
# interval ending at T, so pass toggles at T take effect only after that
# tick (and after consumption, which sees the tick's fresh bits).
_KIND_PRIORITY = {
    EventKind.GENERATION_TICK: 0,
    EventKind.CONSUME_REQUEST: 1,
    EventKind.DISPENSE_REQUEST: 2,
    EventKind.PASS_START: 3,
    EventKind.PASS_END: 4,
}


@dataclass(order=True)
class SimEvent:
    time: float
    priority: int
    seq: int
    kind: EventKind = field(compare=False)
    payload: dict = field(compare=False, default_factory=dict)


@dataclass
class KeyPool:
    """One-time-use key inventory for a node pair (or a user's balance)."""

    owner: tuple[str, str]
    available_bits: int = 0
    generated_total: int = 0
    consumed_total: int = 0

    def generate(self, bits: int) -> None:
        if bits < 0:
            raise SimError("cannot generate negative bits")
        self.available_bits += bits
        self.generated_total += bits
        self._check()

    def consume(self, bits: int) -> None:
        if bits <= 0:
            raise SimError("block size must be positive")
        if bits > self.available_bits:
            raise InsufficientKeyError(
                f"pool {self.owner}: need {bits}, have {self.available_bits}"
            )
        self.available_bits -= bits
        self.consumed_total += bits
        self._check()

    def _check(self) -> None:
        assert self.available_bits >= 0
        assert self.generated_total == self.consumed_total + self.available_bits


def relay_consume(segment_pools: list[KeyPool], block_bits: int) -> None:
    """Consume one block from every segment pool, all-or-nothing."""
    if block_bits <= 0:
        raise SimError("block_bits must be positive")
    for pool in segment_pools:
        if pool.available_bits < block_bits:
            raise InsufficientKeyError(
                f"pool {pool.owner}: need {block_bits}, have {pool.available_bits}"
            )
    for pool in segment_pools:
        pool.consume(block_bits)


def dispense(site_pool: KeyPool, user_pool: KeyPool, block_bits: int) -> None:
    """Move one block from a secure site's pool to a user's balance."""
    if block_bits <= 0:
        raise SimError("block_bits must be positive")
    site_pool.consume(block_bits)  # raises InsufficientKeyError when short
    user_pool.generate(block_bits)


# --- traffic model --------------------------------------------------------


@dataclass(frozen=True)
class PairDemand:
    pair: tuple[str, str]
    demand_bits_per_s: float
    block_bits: int = 256

    def __post_init__(self) -> None:
        if self.demand_bits_per_s < 0 or self.block_bits <= 0:
            raise SimError("demand rate must be >= 0 and block_bits > 0")


@dataclass(frozen=True)
class UserSpec:
    user_id: str
    block_bits: int = 256
    consume_bits_per_s: float = 1.0

    def __post_init__(self) -> None:
        if self.block_bits <= 0 or self.consume_bits_per_s < 0:
            raise SimError("user block_bits > 0 and consume rate >= 0 required")


@dataclass(frozen=True)
class SecureSite:
    """A secure site dispensing key blocks to registered mobile users."""

    site_id: str
    source_pair: tuple[str, str]
    users: tuple[UserSpec, ...] = ()


@dataclass(frozen=True)
class TrafficModel:
    pair_demands: tuple[PairDemand, ...] = ()
    sites: tuple[SecureSite, ...] = ()


# --- simulation -----------------------------------------------------------


def _pool_key(pair: tuple[str, str]) -> str:
    return f"{pair[0]}|{pair[1]}"


@dataclass
class _Link:
    """Per-plan-item state: one generation lane per segment (or one for
    direct/untrusted links), each with its own active flag and fractional
    bit carry."""

    item: PlanItem
    segment_pools: list[KeyPool]
    e2e_pool: KeyPool
    trusted_relays: tuple[str, ...]
    is_satellite: bool
    active: list[bool]
    carry: list[float]

    @property
    def lanes(self) -> int:
        return max(1, len(self.segment_pools))


@dataclass(frozen=True)
class SimReport:
    """Immutable result of one simulation run."""

    duration_s: float
    tick_s: float
    seed: int
    pools: dict
    users: dict
    outages: tuple[dict, ...]
    announcements: tuple[dict, ...]
    series: tuple[dict, ...]
    events_processed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "duration_s": self.duration_s,
            "tick_s": self.tick_s,
            "seed": self.seed,
            "pools": self.pools,
            "users": self.users,
            "outages": list(self.outages),
            "announcements": list(self.announcements),
            "series": list(self.series),
            "events_processed": self.events_processed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def leakage_audit(self, compromised_nodes: set[str]) -> list[dict]:
        """Announcement records whose trusted relays include a compromised node."""
        return [
            ann
            for ann in self.announcements
            if set(ann["relays"]) & compromised_nodes
        ]


class Simulation:
    """Event-loop state; use :func:`run` for the one-shot interface."""

    def __init__(
        self,
        plan: DeploymentPlan,
        traffic: TrafficModel,
        passes: dict[tuple[str, str], list[tuple[float, float]]],
        duration_s: float,
        seed: int = 0,
        tick_s: float = 1.0,
        sample_interval_s: float = 60.0,
        stochastic: bool = False,
    ) -> None:
        if duration_s < 0 or tick_s <= 0:
            raise SimError("duration_s must be >= 0 and tick_s > 0")
        self.duration_s = float(duration_s)
        self.tick_s = float(tick_s)
        self.seed = int(seed)
        self.sample_interval_s = float(sample_interval_s)
        self.stochastic = stochastic
        self.rng = np.random.default_rng(self.seed)

        self.links: dict[tuple[str, str], _Link] = {}
        for item in plan.items:
            pair = item.endpoints
            trusted = tuple(
                node_id for node_id, kind in item.relay_path if kind.is_trusted
            )
            if trusted:
                nodes = [pair[0], *trusted, pair[1]]
                segment_pools = [
                    KeyPool(owner=(nodes[i], nodes[i + 1]))
                    for i in range(len(nodes) - 1)
                ]
            else:
                segment_pools = []
            is_sat = item.technology in (
                TechnologyKind.SATELLITE_TRUSTED_RELAY,
                TechnologyKind.SATELLITE_UNTRUSTED,
            )
            lanes = max(1, len(segment_pools))
            self.links[pair] = _Link(
                item=item,
                segment_pools=segment_pools,
                e2e_pool=KeyPool(owner=pair),
                trusted_relays=trusted,
                is_satellite=is_sat,
                active=[not is_sat] * lanes,
                carry=[0.0] * lanes,
            )

        known_pairs = set(self.links)
        for d in traffic.pair_demands:
            if d.pair not in known_pairs:
                raise SimError(f"traffic references unplanned pair {d.pair}")
        for site in traffic.sites:
            if site.source_pair not in known_pairs:
                raise SimError(
                    f"site {site.site_id} references unplanned pair {site.source_pair}"
                )
        for pair in passes:
            if pair not in known_pairs:
                raise SimError(f"contact plan references unplanned pair {pair}")
        self.traffic = traffic
        self.backlogs: dict[tuple[str, str], float] = {
            d.pair: 0.0 for d in traffic.pair_demands
        }
        self.user_pools: dict[str, KeyPool] = {}
        self.user_specs: dict[str, tuple[SecureSite, UserSpec]] = {}
        for site in traffic.sites:
            for user in site.users:
                if user.user_id in self.user_pools:
                    raise SimError(f"duplicate user id {user.user_id}")
                self.user_pools[user.user_id] = KeyPool(owner=(site.site_id, user.user_id))
                self.user_specs[user.user_id] = (site, user)

        self.outages: list[dict] = []
        self.announcements: list[dict] = []
        self.series: list[dict] = []
        self.events_processed = 0
        self._seq = 0
        self._queue: list[SimEvent] = []
        self._next_sample = 0.0

        for pair, windows in passes.items():
            for window in windows:
                start, end = window[0], window[1]
                lane = window[2] if len(window) > 2 else None
                if end <= start:
                    raise SimError(f"bad pass window ({start}, {end}) for {pair}")
                if lane is not None and not 0 <= lane < self.links[pair].lanes:
                    raise SimError(f"bad lane {lane} for {pair}")
                if start < self.duration_s:
                    payload = {"pair": pair, "lane": lane}
                    self._push(max(0.0, start), EventKind.PASS_START, payload)
                    self._push(min(end, self.duration_s), EventKind.PASS_END, payload)

        t = 0.0
        while t < self.duration_s:
            t_next = min(t + self.tick_s, self.duration_s)
            self._push(t_next, EventKind.GENERATION_TICK, {"dt": t_next - t})
            for d in traffic.pair_demands:
                self._push(t_next, EventKind.CONSUME_REQUEST, {"pair": d.pair})
            for site in traffic.sites:
                for user in site.users:
                    self._push(
                        t_next,
                        EventKind.DISPENSE_REQUEST,
                        {"user": user.user_id, "dt": t_next - t},
                    )
            t = t_next

    def _push(self, time: float, kind: EventKind, payload: dict) -> None:
        self._seq += 1
        heapq.heappush(
            self._queue, SimEvent(time, _KIND_PRIORITY[kind], self._seq, kind, payload)
        )

    # -- event handlers ----------------------------------------------------

    def _gen_bits(self, rate: float, dt: float, link: _Link, lane: int) -> int:
        if self.stochastic:
            return int(self.rng.poisson(rate * dt))
        link.carry[lane] += rate * dt
        bits = math.floor(link.carry[lane] + 1e-9)
        link.carry[lane] -= bits
        return bits

    def _on_generation(self, ev: SimEvent) -> None:
        dt = ev.payload["dt"]
        for _, link in sorted(self.links.items()):
            for lane in range(link.lanes):
                if not link.active[lane]:
                    continue
                bits = self._gen_bits(link.item.key_rate_bps, dt, link, lane)
                if bits <= 0:
                    continue
                if link.segment_pools:
                    link.segment_pools[lane].generate(bits)
                else:
                    link.e2e_pool.generate(bits)

    def _on_consume(self, ev: SimEvent) -> None:
        pair = ev.payload["pair"]
        demand = next(d for d in self.traffic.pair_demands if d.pair == pair)
        link = self.links[pair]
        self.backlogs[pair] += demand.demand_bits_per_s * self.tick_s
        while self.backlogs[pair] >= demand.block_bits:
            try:
                if link.segment_pools:
                    relay_consume(link.segment_pools, demand.block_bits)
                    link.e2e_pool.generate(demand.block_bits)
                    self._announce(ev.time, link, demand.block_bits)
                link.e2e_pool.consume(demand.block_bits)
            except InsufficientKeyError:
                self.outages.append(
                    {
                        "time_s": ev.time,
                        "kind": "pair_demand",
                        "pair": list(pair),
                        "block_bits": demand.block_bits,
                    }
                )
                break
            self.backlogs[pair] -= demand.block_bits

    def _announce(self, time: float, link: _Link, block_bits: int) -> None:
        self.announcements.append(
            {
                "time_s": time,
                "pair": list(link.item.endpoints),
                "relays": list(link.trusted_relays),
                "block_bits": block_bits,
            }
        )

    def _on_dispense(self, ev: SimEvent) -> None:
        user_id = ev.payload["user"]
        dt = ev.payload["dt"]
        site, spec = self.user_specs[user_id]
        user_pool = self.user_pools[user_id]
        burn = min(user_pool.available_bits, math.floor(spec.consume_bits_per_s * dt))
        if burn > 0:
            user_pool.consume(burn)
        if user_pool.available_bits == 0 and spec.block_bits > 0:
            site_link = self.links[site.source_pair]
            site_pool = site_link.e2e_pool
            try:
                # A relayed link holds key in its segment pools; mint the
                # missing end-to-end bits over the chain before dispensing.
                deficit = spec.block_bits - site_pool.available_bits
                if deficit > 0 and site_link.segment_pools:
                    relay_consume(site_link.segment_pools, deficit)
                    site_pool.generate(deficit)
                    self._announce(ev.time, site_link, deficit)
                dispense(site_pool, user_pool, spec.block_bits)
            except InsufficientKeyError:
                self.outages.append(
                    {
                        "time_s": ev.time,
                        "kind": "user_refill",
                        "site": site.site_id,
                        "user": user_id,
                        "block_bits": spec.block_bits,
                    }
                )

    def _on_pass(self, ev: SimEvent, active: bool) -> None:
        link = self.links[ev.payload["pair"]]
        lanes = range(link.lanes) if ev.payload["lane"] is None else [ev.payload["lane"]]
        for lane in lanes:
            link.active[lane] = active
            if not active:
                link.carry[lane] = 0.0  # fractional bits do not survive a pass

    def _sample(self, time: float) -> None:
        snapshot: dict = {"t_s": time}
        for pair, link in sorted(self.links.items()):
            snapshot[_pool_key(pair)] = link.e2e_pool.available_bits
            for pool in link.segment_pools:
                snapshot[_pool_key(pool.owner)] = pool.available_bits
        for user_id in sorted(self.user_pools):
            snapshot[f"user:{user_id}"] = self.user_pools[user_id].available_bits
        self.series.append(snapshot)

    def _check_conservation(self) -> None:
        for link in self.links.values():
            for pool in [link.e2e_pool, *link.segment_pools]:
                assert pool.generated_total == pool.consumed_total + pool.available_bits
                assert pool.available_bits >= 0
        for pool in self.user_pools.values():
            assert pool.generated_total == pool.consumed_total + pool.available_bits

    def run(self) -> SimReport:
        self._sample(0.0)
        self._next_sample = self.sample_interval_s
        handlers = {
            EventKind.GENERATION_TICK: self._on_generation,
            EventKind.CONSUME_REQUEST: self._on_consume,
            EventKind.DISPENSE_REQUEST: self._on_dispense,
            EventKind.PASS_START: lambda ev: self._on_pass(ev, True),
            EventKind.PASS_END: lambda ev: self._on_pass(ev, False),
        }
        while self._queue:
            ev = heapq.heappop(self._queue)
            handlers[ev.kind](ev)
            self.events_processed += 1
            self._check_conservation()
            if (
                not self._queue or self._queue[0].time > ev.time
            ) and ev.time >= self._next_sample:
                self._sample(ev.time)
                while self._next_sample <= ev.time:
                    self._next_sample += self.sample_interval_s

        pools: dict = {}
        for pair, link in sorted(self.links.items()):
            for pool in [link.e2e_pool, *link.segment_pools]:
                pools[_pool_key(pool.owner)] = {
                    "generated_bits": pool.generated_total,
                    "consumed_bits": pool.consumed_total,
                    "available_bits": pool.available_bits,
                }
        users = {
            user_id: {
                "generated_bits": pool.generated_total,
                "consumed_bits": pool.consumed_total,
                "available_bits": pool.available_bits,
            }
            for user_id, pool in sorted(self.user_pools.items())
        }
        return SimReport(
            duration_s=self.duration_s,
            tick_s=self.tick_s,
            seed=self.seed,
            pools=pools,
            users=users,
            outages=tuple(self.outages),
            announcements=tuple(self.announcements),
            series=tuple(self.series),
            events_processed=self.events_processed,
        )


def run(
    plan: DeploymentPlan,
    traffic: TrafficModel,
    passes: Optional[dict[tuple[str, str], list[tuple[float, float]]]] = None,
    duration_s: float = 0.0,
    seed: int = 0,
    tick_s: float = 1.0,
    sample_interval_s: float = 60.0,
    stochastic: bool = False,
) -> SimReport:
    """Simulate a deployment plan under a traffic model; see module docs."""
    sim = Simulation(
        plan,
        traffic,
        passes or {},
        duration_s,
        seed=seed,
        tick_s=tick_s,
        sample_interval_s=sample_interval_s,
        stochastic=stochastic,
    )
    return sim.run()
