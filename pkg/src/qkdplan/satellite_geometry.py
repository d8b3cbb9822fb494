"""Circular-orbit geometry: slant ranges, visibility, passes, night gating.

Spherical Earth (R = 6371 km), circular Keplerian orbits, Earth rotating at
360 deg per sidereal day.  Good enough for altitude-band and line-of-sight
reasoning; not an ephemeris.  The longitude convention is that the prime
meridian is aligned with the inertial x axis at the orbit epoch.

Pass windows are found by coarse sampling and bisection refinement of the
elevation crossing to 1 s, so repeated runs are bit-for-bit identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Union

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398600.4418
SIDEREAL_DAY_S = 86164.0
EARTH_ROT_RAD_S = 2.0 * math.pi / SIDEREAL_DAY_S

# Altitude at which the model's orbital period equals one sidereal day.
GEO_ALTITUDE_KM = (MU_KM3_S2 * (SIDEREAL_DAY_S / (2.0 * math.pi)) ** 2) ** (1.0 / 3.0) - EARTH_RADIUS_KM


class GeometryError(ValueError):
    """Invalid geometry input."""


@dataclass(frozen=True)
class SolarElevationNight:
    """Night = sun below a solar-elevation threshold (civil twilight default)."""

    threshold_deg: float = -6.0


@dataclass(frozen=True)
class FixedLocalHoursNight:
    """Night = fixed local-time interval, e.g. 20:00 to 06:00 (wraps midnight)."""

    start_hour: float = 20.0
    end_hour: float = 6.0


NightMode = Union[SolarElevationNight, FixedLocalHoursNight]


@dataclass(frozen=True)
class GroundStation:
    id: str
    latitude_deg: float
    longitude_deg: float
    min_elevation_deg: float = 10.0
    night_mode: NightMode = field(default_factory=SolarElevationNight)

    def __post_init__(self) -> None:
        if abs(self.latitude_deg) > 90.0:
            raise GeometryError("latitude must be in [-90, 90]")
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise GeometryError("min_elevation_deg must be in [0, 90)")


@dataclass(frozen=True)
class OrbitSpec:
    altitude_km: float
    inclination_deg: float = 0.0
    raan_deg: float = 0.0
    initial_phase_deg: float = 0.0
    epoch: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc)

    def __post_init__(self) -> None:
        if self.altitude_km <= 0:
            raise GeometryError("altitude_km must be > 0")
        if self.epoch.tzinfo is None:
            raise GeometryError("epoch must be timezone-aware (UTC)")

    @property
    def semi_major_axis_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis_km**3 / MU_KM3_S2)


@dataclass(frozen=True)
class PassWindow:
    """One usable interval of a satellite link for a station (or pair)."""

    station_id: Union[str, tuple[str, str]]
    start: datetime
    end: datetime
    max_elevation_deg: float
    min_slant_range_km: float

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise GeometryError("window start must precede end")

    @property
    def duration_s(self) -> float:
        return (self.end - self.start).total_seconds()


def slant_range(altitude_km: float, elevation_deg: float) -> float:
    """Station-to-satellite distance at a given elevation, spherical Earth."""
    if not 0.0 <= elevation_deg <= 90.0:
        raise GeometryError("elevation must be in [0, 90]")
    if altitude_km <= 0:
        raise GeometryError("altitude_km must be > 0")
    r = EARTH_RADIUS_KM
    eps = math.radians(elevation_deg)
    return math.sqrt((r + altitude_km) ** 2 - (r * math.cos(eps)) ** 2) - r * math.sin(eps)


def max_simultaneous_separation(altitude_km: float, min_elevation_deg: float) -> float:
    """Farthest two stations can be while both see the satellite at once.

    Ground-arc distance 2 R psi, where psi is the Earth-central angle of the
    visibility cone edge at the minimum elevation.
    """
    if not 0.0 <= min_elevation_deg <= 90.0:
        raise GeometryError("elevation must be in [0, 90]")
    if altitude_km <= 0:
        raise GeometryError("altitude_km must be > 0")
    r = EARTH_RADIUS_KM
    eps = math.radians(min_elevation_deg)
    psi = math.acos(r * math.cos(eps) / (r + altitude_km)) - eps
    return 2.0 * r * psi


def propagate(orbit: OrbitSpec, t: datetime) -> tuple[float, float, float]:
    """Sub-satellite point (lat deg, lon deg) and altitude at time t."""
    dt = (t - orbit.epoch).total_seconds()
    if dt < 0:
        raise GeometryError("t precedes the orbit epoch")
    n = 2.0 * math.pi / orbit.period_s
    u = math.radians(orbit.initial_phase_deg) + n * dt
    inc = math.radians(orbit.inclination_deg)
    raan = math.radians(orbit.raan_deg)
    # Inertial unit vector of the satellite position.
    x = math.cos(raan) * math.cos(u) - math.sin(raan) * math.sin(u) * math.cos(inc)
    y = math.sin(raan) * math.cos(u) + math.cos(raan) * math.sin(u) * math.cos(inc)
    z = math.sin(u) * math.sin(inc)
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    lon_inertial = math.atan2(y, x)
    lon = math.degrees(lon_inertial - EARTH_ROT_RAD_S * dt)
    lon = (lon + 180.0) % 360.0 - 180.0
    return lat, lon, orbit.altitude_km


def _central_angle_rad(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dlon = math.radians(lon2 - lon1)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dlon)
    return math.acos(max(-1.0, min(1.0, c)))


def ground_distance_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance between two ground points."""
    return EARTH_RADIUS_KM * _central_angle_rad(lat1, lon1, lat2, lon2)


def elevation_deg(orbit: OrbitSpec, station: GroundStation, t: datetime) -> float:
    """Elevation of the satellite above the station's horizon at time t."""
    lat, lon, alt = propagate(orbit, t)
    gamma = _central_angle_rad(station.latitude_deg, station.longitude_deg, lat, lon)
    r = EARTH_RADIUS_KM
    rs = r + alt
    # Elevation from the triangle station / Earth center / satellite.
    sin_g, cos_g = math.sin(gamma), math.cos(gamma)
    d = math.sqrt(r * r + rs * rs - 2.0 * r * rs * cos_g)
    sin_el = (rs * cos_g - r) / d
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_el))))


def slant_range_at(orbit: OrbitSpec, station: GroundStation, t: datetime) -> float:
    lat, lon, alt = propagate(orbit, t)
    gamma = _central_angle_rad(station.latitude_deg, station.longitude_deg, lat, lon)
    r = EARTH_RADIUS_KM
    rs = r + alt
    return math.sqrt(r * r + rs * rs - 2.0 * r * rs * math.cos(gamma))


def _refine_boundary(
    f: Callable[[datetime], float],
    t_below: datetime,
    t_above: datetime,
    tol_s: float = 1.0,
) -> datetime:
    """Bisect a threshold crossing between a below- and an above-sample.

    The samples may be in either time order; the returned time is on the
    above side, within tol_s of the true crossing.
    """
    while abs((t_above - t_below).total_seconds()) > tol_s:
        mid = t_below + (t_above - t_below) / 2
        if f(mid) >= 0:
            t_above = mid
        else:
            t_below = mid
    return t_above


def pass_windows(
    orbit: OrbitSpec,
    station: GroundStation,
    span_start: datetime,
    span_end: datetime,
    step_s: float = 10.0,
) -> list[PassWindow]:
    """Visibility windows (elevation >= station minimum) within the span."""
    if step_s <= 0:
        raise GeometryError("step_s must be > 0")
    if span_end <= span_start:
        return []

    def above(t: datetime) -> float:
        return elevation_deg(orbit, station, t) - station.min_elevation_deg

    windows: list[PassWindow] = []
    step = timedelta(seconds=step_s)
    t = span_start
    prev_t, prev_up = t, above(t) >= 0
    open_start = span_start if prev_up else None
    while t < span_end:
        t = min(t + step, span_end)
        up = above(t) >= 0
        if up and not prev_up:
            open_start = _refine_boundary(above, prev_t, t)
        elif prev_up and not up:
            end = _refine_boundary(above, t, prev_t)
            if open_start is not None and end > open_start:
                windows.append(_finish_window(orbit, station, open_start, end))
            open_start = None
        prev_t, prev_up = t, up
    if prev_up and open_start is not None and span_end > open_start:
        windows.append(_finish_window(orbit, station, open_start, span_end))
    return windows


def _finish_window(
    orbit: OrbitSpec, station: GroundStation, start: datetime, end: datetime
) -> PassWindow:
    max_el = _max_elevation(orbit, station, start, end)
    return PassWindow(
        station_id=station.id,
        start=start,
        end=end,
        max_elevation_deg=max_el,
        min_slant_range_km=slant_range(orbit.altitude_km, max_el),
    )


def _max_elevation(
    orbit: OrbitSpec, station: GroundStation, start: datetime, end: datetime
) -> float:
    dur = (end - start).total_seconds()
    coarse = max(1.0, min(30.0, dur / 50.0))
    best_t, best = start, elevation_deg(orbit, station, start)
    t = start
    while t <= end:
        e = elevation_deg(orbit, station, t)
        if e > best:
            best_t, best = t, e
        t += timedelta(seconds=coarse)
    e_end = elevation_deg(orbit, station, end)
    if e_end > best:
        best_t, best = end, e_end
    # 1 s sweep around the coarse peak.
    lo = max(start, best_t - timedelta(seconds=coarse))
    hi = min(end, best_t + timedelta(seconds=coarse))
    t = lo
    while t <= hi:
        e = elevation_deg(orbit, station, t)
        if e > best:
            best = e
        t += timedelta(seconds=1)
    return best


# --- night gating ---------------------------------------------------------


def solar_elevation_deg(lat_deg: float, lon_deg: float, t: datetime) -> float:
    """Low-precision solar elevation (mean-sun formulas, ~0.5 deg accuracy)."""
    j2000 = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    d = (t - j2000).total_seconds() / 86400.0
    mean_lon = math.radians((280.460 + 0.9856474 * d) % 360.0)
    mean_anom = math.radians((357.528 + 0.9856003 * d) % 360.0)
    ecl_lon = mean_lon + math.radians(1.915) * math.sin(mean_anom) + math.radians(
        0.020
    ) * math.sin(2.0 * mean_anom)
    obliq = math.radians(23.439 - 0.0000004 * d)
    ra = math.atan2(math.cos(obliq) * math.sin(ecl_lon), math.cos(ecl_lon))
    dec = math.asin(math.sin(obliq) * math.sin(ecl_lon))
    gmst_deg = (280.46061837 + 360.98564736629 * d) % 360.0
    hour_angle = math.radians(gmst_deg + lon_deg) - ra
    lat = math.radians(lat_deg)
    sin_el = math.sin(lat) * math.sin(dec) + math.cos(lat) * math.cos(dec) * math.cos(
        hour_angle
    )
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_el))))


def is_night(station: GroundStation, t: datetime) -> bool:
    mode = station.night_mode
    if isinstance(mode, FixedLocalHoursNight):
        local_hour = (
            t.astimezone(timezone.utc).hour
            + t.minute / 60.0
            + t.second / 3600.0
            + station.longitude_deg / 15.0
        ) % 24.0
        if mode.start_hour <= mode.end_hour:
            return mode.start_hour <= local_hour < mode.end_hour
        return local_hour >= mode.start_hour or local_hour < mode.end_hour
    return (
        solar_elevation_deg(station.latitude_deg, station.longitude_deg, t)
        < mode.threshold_deg
    )


def night_intervals(
    station: GroundStation,
    span_start: datetime,
    span_end: datetime,
    step_s: float = 60.0,
) -> list[tuple[datetime, datetime]]:
    """Night intervals for a station, sampled then refined to 1 s."""
    if span_end <= span_start:
        return []

    def nightness(t: datetime) -> float:
        return 1.0 if is_night(station, t) else -1.0

    intervals: list[tuple[datetime, datetime]] = []
    step = timedelta(seconds=step_s)
    t = span_start
    prev_t, prev_night = t, is_night(station, t)
    open_start = span_start if prev_night else None
    while t < span_end:
        t = min(t + step, span_end)
        night = is_night(station, t)
        if night and not prev_night:
            open_start = _refine_boundary(nightness, prev_t, t)
        elif prev_night and not night:
            end = _refine_boundary(nightness, t, prev_t)
            if open_start is not None and end > open_start:
                intervals.append((open_start, end))
            open_start = None
        prev_t, prev_night = t, night
    if prev_night and open_start is not None and span_end > open_start:
        intervals.append((open_start, span_end))
    return intervals


def night_filter(
    windows: list[PassWindow], station: GroundStation
) -> list[PassWindow]:
    """Intersect pass windows with the station's night intervals.

    Windows may be split; elevation statistics are inherited from the parent
    window (conservative: the parent max still bounds the fragment).
    """
    if not windows:
        return []
    span_start = min(w.start for w in windows) - timedelta(hours=1)
    span_end = max(w.end for w in windows) + timedelta(hours=1)
    nights = night_intervals(station, span_start, span_end)
    out: list[PassWindow] = []
    for w in windows:
        for n_start, n_end in nights:
            start = max(w.start, n_start)
            end = min(w.end, n_end)
            if start < end:
                out.append(
                    PassWindow(
                        station_id=w.station_id,
                        start=start,
                        end=end,
                        max_elevation_deg=w.max_elevation_deg,
                        min_slant_range_km=w.min_slant_range_km,
                    )
                )
    out.sort(key=lambda w: w.start)
    return out


def intersect_window_lists(
    windows_a: list[PassWindow], windows_b: list[PassWindow]
) -> list[tuple[PassWindow, PassWindow, datetime, datetime]]:
    """All pairwise overlaps of two window lists (parents + overlap bounds)."""
    overlaps = []
    for wa in windows_a:
        for wb in windows_b:
            start = max(wa.start, wb.start)
            end = min(wa.end, wb.end)
            if start < end:
                overlaps.append((wa, wb, start, end))
    overlaps.sort(key=lambda o: o[2])
    return overlaps


def simultaneous_windows(
    orbit: OrbitSpec,
    station_a: GroundStation,
    station_b: GroundStation,
    span_start: datetime,
    span_end: datetime,
    step_s: float = 10.0,
    apply_night: bool = True,
) -> list[PassWindow]:
    """Windows during which both stations see the satellite (night-gated)."""
    wa = pass_windows(orbit, station_a, span_start, span_end, step_s)
    wb = pass_windows(orbit, station_b, span_start, span_end, step_s)
    if apply_night:
        wa = night_filter(wa, station_a)
        wb = night_filter(wb, station_b)
    out = []
    for pa, pb, start, end in intersect_window_lists(wa, wb):
        out.append(
            PassWindow(
                station_id=(station_a.id, station_b.id),
                start=start,
                end=end,
                max_elevation_deg=min(pa.max_elevation_deg, pb.max_elevation_deg),
                min_slant_range_km=max(pa.min_slant_range_km, pb.min_slant_range_km),
            )
        )
    return out


def sequential_contact_plan(
    orbit: OrbitSpec,
    stations: list[GroundStation],
    span_start: datetime,
    span_end: datetime,
    step_s: float = 10.0,
    apply_night: bool = True,
) -> list[tuple[str, PassWindow]]:
    """Night-gated windows for all stations, merged and ordered by start.

    A trusted-relay satellite can serve the stations one after another, in
    different passes if need be.
    """
    plan: list[tuple[str, PassWindow]] = []
    for station in stations:
        windows = pass_windows(orbit, station, span_start, span_end, step_s)
        if apply_night:
            windows = night_filter(windows, station)
        plan.extend((station.id, w) for w in windows)
    plan.sort(key=lambda sw: (sw[1].start, sw[0]))
    return plan
