"""Scenario configuration: strict JSON parsing with explicit units.

One human-editable JSON file declares sites, fiber routes, orbits, demands,
parameter overrides, and simulation settings.  Parsing is strict: unknown
keys are rejected with the offending path so typos cannot silently change a
scenario.  ``ScenarioConfig.to_dict`` emits the fully normalized form, and
``parse(serialize(config))`` round-trips exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from . import link_models as lm
from .keysim import PairDemand, SecureSite, TrafficModel, UserSpec
from .planner import Demand, PlannerParams
from .satellite_geometry import (
    FixedLocalHoursNight,
    GroundStation,
    NightMode,
    OrbitSpec,
    SolarElevationNight,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed scenario configuration; message carries the JSON path."""


class _Fields:
    """Pops typed fields from a dict and rejects leftovers."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected an object")
        self.data = dict(data)
        self.path = path

    def take(self, key: str, kind, default=..., required: bool = False):
        if key not in self.data:
            if required or default is ...:
                raise ConfigError(f"{self.path}.{key}: missing required field")
            return default
        value = self.data.pop(key)
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and not isinstance(value, kind):
            raise ConfigError(
                f"{self.path}.{key}: expected {getattr(kind, '__name__', kind)}, "
                f"got {type(value).__name__}"
            )
        return value

    def done(self) -> None:
        if self.data:
            raise ConfigError(
                f"{self.path}: unknown key(s) {sorted(self.data)}"
            )


@dataclass(frozen=True)
class FiberRoute:
    id: str
    a: str
    b: str
    length_km: float
    relay_offsets_km: tuple[float, ...] = ()


@dataclass(frozen=True)
class SimSettings:
    duration_s: float = 0.0
    seed: int = 0
    tick_s: float = 1.0
    sample_interval_s: float = 60.0
    stochastic: bool = False
    traffic: TrafficModel = field(default_factory=TrafficModel)


@dataclass(frozen=True)
class ScenarioConfig:
    sites: tuple[GroundStation, ...] = ()
    fiber_routes: tuple[FiberRoute, ...] = ()
    orbits: tuple[OrbitSpec, ...] = ()
    orbit_ids: tuple[str, ...] = ()
    demands: tuple[Demand, ...] = ()
    fiber: lm.FiberParams = field(default_factory=lm.FiberParams)
    free_space: lm.FreeSpaceParams = field(default_factory=lm.FreeSpaceParams)
    satellite: lm.SatLinkParams = field(default_factory=lm.SatLinkParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    simulation: SimSettings = field(default_factory=SimSettings)

    def site(self, site_id: str) -> GroundStation:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise ConfigError(f"unknown site id {site_id!r}")

    def orbit(self, orbit_id: str) -> OrbitSpec:
        for oid, orbit in zip(self.orbit_ids, self.orbits):
            if oid == orbit_id:
                return orbit
        raise ConfigError(f"unknown orbit id {orbit_id!r}")

    def fiber_route_for(self, a: str, b: str) -> Optional[FiberRoute]:
        for route in self.fiber_routes:
            if {route.a, route.b} == {a, b}:
                return route
        return None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sites": [_site_to_dict(s) for s in self.sites],
            "fiber_routes": [
                {
                    "id": r.id,
                    "a": r.a,
                    "b": r.b,
                    "length_km": r.length_km,
                    "relay_offsets_km": list(r.relay_offsets_km),
                }
                for r in self.fiber_routes
            ],
            "orbits": [
                {
                    "id": oid,
                    "altitude_km": o.altitude_km,
                    "inclination_deg": o.inclination_deg,
                    "raan_deg": o.raan_deg,
                    "initial_phase_deg": o.initial_phase_deg,
                    "epoch": o.epoch.isoformat().replace("+00:00", "Z"),
                }
                for oid, o in zip(self.orbit_ids, self.orbits)
            ],
            "demands": [
                {
                    "a": d.endpoint_a,
                    "b": d.endpoint_b,
                    "distance_km": d.distance_km,
                    "has_fiber": d.has_fiber,
                    "has_los": d.has_los,
                    "transoceanic": d.transoceanic,
                    "untrusted_required": d.untrusted_required,
                }
                for d in self.demands
            ],
            "parameters": {
                "fiber": {
                    "attenuation_db_per_km": self.fiber.attenuation_db_per_km,
                    "coexistence_penalty_db": self.fiber.coexistence_penalty_db,
                },
                "free_space": {
                    "atmospheric_absorption_db_per_km": self.free_space.atmospheric_absorption_db_per_km,
                    "weather_penalty_db": self.free_space.weather_penalty_db,
                    "turbulence_penalty_db": self.free_space.turbulence_penalty_db,
                    "tx_divergence_urad": self.free_space.tx_divergence_urad,
                    "tx_aperture_m": self.free_space.tx_aperture_m,
                    "rx_aperture_m": self.free_space.rx_aperture_m,
                },
                "satellite": {
                    "altitude_km": self.satellite.altitude_km,
                    "ground_rx_aperture_m": self.satellite.ground_rx_aperture_m,
                    "sat_rx_aperture_m": self.satellite.sat_rx_aperture_m,
                    "uplink_beam_m_at_500km": self.satellite.uplink_beam_m_at_500km,
                    "atmos_attenuation_db": self.satellite.atmos_attenuation_db,
                    "pointing_penalty_db": self.satellite.pointing_penalty_db,
                    "downlink_divergence_urad": self.satellite.downlink_divergence_urad,
                    "sat_tx_aperture_m": self.satellite.sat_tx_aperture_m,
                },
                "planner": {
                    "max_fiber_direct_km": self.planner.max_fiber_direct_km,
                    "max_freespace_km": self.planner.max_freespace_km,
                    "untrusted_max_separation_km": self.planner.untrusted_max_separation_km,
                    "max_span_km": self.planner.max_span_km,
                    "satellite_altitude_km": self.planner.satellite_altitude_km,
                    "source_rate_hz": self.planner.source_rate_hz,
                    "sifting_factor": self.planner.sifting_factor,
                    "w_rate": self.planner.w_rate,
                    "w_cost": self.planner.w_cost,
                },
            },
            "simulation": {
                "duration_s": self.simulation.duration_s,
                "seed": self.simulation.seed,
                "tick_s": self.simulation.tick_s,
                "sample_interval_s": self.simulation.sample_interval_s,
                "stochastic": self.simulation.stochastic,
                "traffic": {
                    "pair_demands": [
                        {
                            "a": p.pair[0],
                            "b": p.pair[1],
                            "demand_bits_per_s": p.demand_bits_per_s,
                            "block_bits": p.block_bits,
                        }
                        for p in self.simulation.traffic.pair_demands
                    ],
                    "sites": [
                        {
                            "site_id": s.site_id,
                            "source_a": s.source_pair[0],
                            "source_b": s.source_pair[1],
                            "users": [
                                {
                                    "user_id": u.user_id,
                                    "block_bits": u.block_bits,
                                    "consume_bits_per_s": u.consume_bits_per_s,
                                }
                                for u in s.users
                            ],
                        }
                        for s in self.simulation.traffic.sites
                    ],
                },
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _site_to_dict(s: GroundStation) -> dict:
    if isinstance(s.night_mode, FixedLocalHoursNight):
        night = {
            "mode": "fixed_hours",
            "start_hour": s.night_mode.start_hour,
            "end_hour": s.night_mode.end_hour,
        }
    else:
        night = {"mode": "solar", "threshold_deg": s.night_mode.threshold_deg}
    return {
        "id": s.id,
        "lat_deg": s.latitude_deg,
        "lon_deg": s.longitude_deg,
        "min_elevation_deg": s.min_elevation_deg,
        "night": night,
    }


def _parse_night(data, path: str) -> NightMode:
    f = _Fields(data, path)
    mode = f.take("mode", str, default="solar")
    if mode == "solar":
        night: NightMode = SolarElevationNight(
            threshold_deg=f.take("threshold_deg", float, default=-6.0)
        )
    elif mode == "fixed_hours":
        night = FixedLocalHoursNight(
            start_hour=f.take("start_hour", float, default=20.0),
            end_hour=f.take("end_hour", float, default=6.0),
        )
    else:
        raise ConfigError(f"{path}.mode: must be 'solar' or 'fixed_hours'")
    f.done()
    return night


def _parse_epoch(text: str, path: str) -> datetime:
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ConfigError(f"{path}: bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def parse_config(data: dict) -> ScenarioConfig:
    top = _Fields(data, "$")
    version = top.take("schema_version", int, default=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"$.schema_version: unsupported version {version}")

    sites = []
    for i, entry in enumerate(top.take("sites", list, default=[])):
        f = _Fields(entry, f"$.sites[{i}]")
        sites.append(
            GroundStation(
                id=f.take("id", str, required=True),
                latitude_deg=f.take("lat_deg", float, required=True),
                longitude_deg=f.take("lon_deg", float, required=True),
                min_elevation_deg=f.take("min_elevation_deg", float, default=10.0),
                night_mode=_parse_night(
                    f.take("night", dict, default={"mode": "solar"}),
                    f"$.sites[{i}].night",
                ),
            )
        )
        f.done()
    site_ids = [s.id for s in sites]
    if len(set(site_ids)) != len(site_ids):
        raise ConfigError("$.sites: duplicate site ids")

    routes = []
    for i, entry in enumerate(top.take("fiber_routes", list, default=[])):
        f = _Fields(entry, f"$.fiber_routes[{i}]")
        routes.append(
            FiberRoute(
                id=f.take("id", str, required=True),
                a=f.take("a", str, required=True),
                b=f.take("b", str, required=True),
                length_km=f.take("length_km", float, required=True),
                relay_offsets_km=tuple(
                    float(x) for x in f.take("relay_offsets_km", list, default=[])
                ),
            )
        )
        f.done()

    orbit_ids, orbits = [], []
    for i, entry in enumerate(top.take("orbits", list, default=[])):
        f = _Fields(entry, f"$.orbits[{i}]")
        orbit_ids.append(f.take("id", str, required=True))
        orbits.append(
            OrbitSpec(
                altitude_km=f.take("altitude_km", float, required=True),
                inclination_deg=f.take("inclination_deg", float, default=0.0),
                raan_deg=f.take("raan_deg", float, default=0.0),
                initial_phase_deg=f.take("initial_phase_deg", float, default=0.0),
                epoch=_parse_epoch(
                    f.take("epoch", str, default="2024-01-01T00:00:00Z"),
                    f"$.orbits[{i}].epoch",
                ),
            )
        )
        f.done()
    if len(set(orbit_ids)) != len(orbit_ids):
        raise ConfigError("$.orbits: duplicate orbit ids")

    demands = []
    for i, entry in enumerate(top.take("demands", list, default=[])):
        f = _Fields(entry, f"$.demands[{i}]")
        demands.append(
            Demand(
                endpoint_a=f.take("a", str, required=True),
                endpoint_b=f.take("b", str, required=True),
                distance_km=f.take("distance_km", float, required=True),
                has_fiber=f.take("has_fiber", bool, default=False),
                has_los=f.take("has_los", bool, default=False),
                transoceanic=f.take("transoceanic", bool, default=False),
                untrusted_required=f.take("untrusted_required", bool, default=False),
            )
        )
        f.done()

    params = _Fields(top.take("parameters", dict, default={}), "$.parameters")
    fiber_f = _Fields(params.take("fiber", dict, default={}), "$.parameters.fiber")
    fiber = lm.FiberParams(
        attenuation_db_per_km=fiber_f.take("attenuation_db_per_km", float, default=0.2),
        coexistence_penalty_db=fiber_f.take("coexistence_penalty_db", float, default=0.0),
    )
    fiber_f.done()

    fs_f = _Fields(params.take("free_space", dict, default={}), "$.parameters.free_space")
    free_space = lm.FreeSpaceParams(
        atmospheric_absorption_db_per_km=fs_f.take(
            "atmospheric_absorption_db_per_km", float, default=0.07
        ),
        weather_penalty_db=fs_f.take("weather_penalty_db", float, default=0.0),
        turbulence_penalty_db=fs_f.take("turbulence_penalty_db", float, default=0.0),
        tx_divergence_urad=fs_f.take("tx_divergence_urad", float, default=10.0),
        tx_aperture_m=fs_f.take("tx_aperture_m", float, default=0.1),
        rx_aperture_m=fs_f.take("rx_aperture_m", float, default=0.1),
    )
    fs_f.done()

    sat_f = _Fields(params.take("satellite", dict, default={}), "$.parameters.satellite")
    satellite = lm.SatLinkParams(
        direction=lm.Direction.DOWNLINK,
        altitude_km=sat_f.take("altitude_km", float, default=500.0),
        ground_rx_aperture_m=sat_f.take("ground_rx_aperture_m", float, default=0.95),
        sat_rx_aperture_m=sat_f.take("sat_rx_aperture_m", float, default=0.3),
        uplink_beam_m_at_500km=sat_f.take("uplink_beam_m_at_500km", float, default=50.0),
        atmos_attenuation_db=sat_f.take("atmos_attenuation_db", float, default=5.0),
        pointing_penalty_db=sat_f.take("pointing_penalty_db", float, default=5.0),
        downlink_divergence_urad=sat_f.take("downlink_divergence_urad", float, default=9.9),
        sat_tx_aperture_m=sat_f.take("sat_tx_aperture_m", float, default=0.0),
    )
    sat_f.done()

    pl_f = _Fields(params.take("planner", dict, default={}), "$.parameters.planner")
    planner = PlannerParams(
        max_fiber_direct_km=pl_f.take("max_fiber_direct_km", float, default=100.0),
        max_freespace_km=pl_f.take("max_freespace_km", float, default=10.0),
        untrusted_max_separation_km=pl_f.take(
            "untrusted_max_separation_km", float, default=1000.0
        ),
        max_span_km=pl_f.take("max_span_km", float, default=100.0),
        satellite_altitude_km=pl_f.take(
            "satellite_altitude_km", float, default=satellite.altitude_km
        ),
        source_rate_hz=pl_f.take("source_rate_hz", float, default=1e9),
        sifting_factor=pl_f.take("sifting_factor", float, default=0.5),
        w_rate=pl_f.take("w_rate", float, default=1.0),
        w_cost=pl_f.take("w_cost", float, default=0.1),
    )
    pl_f.done()
    params.done()

    sim_f = _Fields(top.take("simulation", dict, default={}), "$.simulation")
    traffic_f = _Fields(sim_f.take("traffic", dict, default={}), "$.simulation.traffic")
    pair_demands = []
    for i, entry in enumerate(traffic_f.take("pair_demands", list, default=[])):
        f = _Fields(entry, f"$.simulation.traffic.pair_demands[{i}]")
        pair_demands.append(
            PairDemand(
                pair=(f.take("a", str, required=True), f.take("b", str, required=True)),
                demand_bits_per_s=f.take("demand_bits_per_s", float, required=True),
                block_bits=f.take("block_bits", int, default=256),
            )
        )
        f.done()
    sim_sites = []
    for i, entry in enumerate(traffic_f.take("sites", list, default=[])):
        f = _Fields(entry, f"$.simulation.traffic.sites[{i}]")
        users = []
        for j, user_entry in enumerate(f.take("users", list, default=[])):
            uf = _Fields(user_entry, f"$.simulation.traffic.sites[{i}].users[{j}]")
            users.append(
                UserSpec(
                    user_id=uf.take("user_id", str, required=True),
                    block_bits=uf.take("block_bits", int, default=256),
                    consume_bits_per_s=uf.take("consume_bits_per_s", float, default=1.0),
                )
            )
            uf.done()
        sim_sites.append(
            SecureSite(
                site_id=f.take("site_id", str, required=True),
                source_pair=(
                    f.take("source_a", str, required=True),
                    f.take("source_b", str, required=True),
                ),
                users=tuple(users),
            )
        )
        f.done()
    traffic_f.done()
    simulation = SimSettings(
        duration_s=sim_f.take("duration_s", float, default=0.0),
        seed=sim_f.take("seed", int, default=0),
        tick_s=sim_f.take("tick_s", float, default=1.0),
        sample_interval_s=sim_f.take("sample_interval_s", float, default=60.0),
        stochastic=sim_f.take("stochastic", bool, default=False),
        traffic=TrafficModel(pair_demands=tuple(pair_demands), sites=tuple(sim_sites)),
    )
    sim_f.done()
    top.done()

    return ScenarioConfig(
        sites=tuple(sites),
        fiber_routes=tuple(routes),
        orbits=tuple(orbits),
        orbit_ids=tuple(orbit_ids),
        demands=tuple(demands),
        fiber=fiber,
        free_space=free_space,
        satellite=satellite,
        planner=planner,
        simulation=simulation,
    )


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)
