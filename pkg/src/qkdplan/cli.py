"""Command-line entry point: budget | plan | passes | simulate.

Exit codes: 0 success, 2 input error, 3 plan infeasibility.  All file
outputs are written atomically (temp file + rename) and are bit-identical
across runs with the same inputs.  The default config path can be set via
the QKDPLAN_CONFIG environment variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import timedelta

from . import link_models as lm
from . import keysim, planner
from .config import ConfigError, ScenarioConfig, load_config
from .satellite_geometry import (
    GeometryError,
    night_filter,
    pass_windows,
    sequential_contact_plan,
    simultaneous_windows,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _rows_to_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _emit(
    args,
    name: str,
    header: list[str],
    rows: list[list],
    json_obj: dict,
) -> None:
    if args.format == "json":
        text = json.dumps(json_obj, indent=2, sort_keys=True) + "\n"
        ext = "json"
    elif args.format == "csv":
        text = _rows_to_csv(header, rows)
        ext = "csv"
    else:
        text = _rows_to_table(header, rows)
        ext = "txt"
    if args.output:
        path = os.path.join(args.output, f"{name}.{ext}")
        _atomic_write(path, text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


# --- budget ---------------------------------------------------------------


def _resolve_link(config: ScenarioConfig, selector: str) -> tuple[str, float, bool]:
    """Selector -> (label, length_km, has_fiber): route id or 'a:b' demand."""
    for route in config.fiber_routes:
        if route.id == selector:
            return route.id, route.length_km, True
    if ":" in selector:
        a, b = selector.split(":", 1)
        for d in config.demands:
            if {d.endpoint_a, d.endpoint_b} == {a, b}:
                return f"{d.endpoint_a}:{d.endpoint_b}", d.distance_km, d.has_fiber
    raise ConfigError(f"unknown link selector {selector!r}")


def cmd_budget(args) -> int:
    config = load_config(args.config)
    label, length_km, _ = _resolve_link(config, args.link)

    budgets: list[tuple[str, lm.LinkBudget]] = [
        ("fiber", lm.fiber_loss(length_km, config.fiber)),
        ("free_space_terrestrial", lm.terrestrial_freespace_loss(length_km, config.free_space)),
    ]
    if length_km > 0:
        down = lm.downlink_loss(length_km, config.satellite)
        budgets.append(("satellite_downlink", down))
        up_params = lm.SatLinkParams(
            direction=lm.Direction.UPLINK,
            altitude_km=config.satellite.altitude_km,
            ground_rx_aperture_m=config.satellite.ground_rx_aperture_m,
            sat_rx_aperture_m=config.satellite.sat_rx_aperture_m,
            uplink_beam_m_at_500km=config.satellite.uplink_beam_m_at_500km,
            atmos_attenuation_db=config.satellite.atmos_attenuation_db,
            pointing_penalty_db=config.satellite.pointing_penalty_db,
            downlink_divergence_urad=config.satellite.downlink_divergence_urad,
            sat_tx_aperture_m=config.satellite.sat_tx_aperture_m,
        )
        budgets.append(("satellite_uplink", lm.uplink_loss(length_km, up_params)))
        arm = lm.downlink_loss(config.satellite.altitude_km, config.satellite)
        combined = lm.LinkBudget(
            (("arm_a", arm.total_db), ("arm_b", arm.total_db))
        )
        budgets.append(("satellite_untrusted_combined", combined))

    header = ["technology", "total_db", "transmittance", "components"]
    rows = [
        [
            tech,
            f"{b.total_db:.6g}",
            f"{b.transmittance:.6g}",
            "; ".join(f"{lbl}={db:.6g}" for lbl, db in b.components),
        ]
        for tech, b in budgets
    ]
    json_obj = {
        "schema_version": 1,
        "link": label,
        "length_km": length_km,
        "budgets": {tech: b.to_dict() for tech, b in budgets},
    }
    _emit(args, f"budget-{label.replace(':', '-')}", header, rows, json_obj)
    return EXIT_OK


# --- plan -----------------------------------------------------------------


def build_plan(config: ScenarioConfig) -> planner.DeploymentPlan:
    """Plan all configured demands, honoring externally supplied relay sites."""
    orbit_id = config.orbit_ids[0] if config.orbit_ids else None
    plan = planner.select_deployment(
        list(config.demands),
        params=config.planner,
        fiber=config.fiber,
        freespace=config.free_space,
        sat=config.satellite,
        orbit_id=orbit_id,
    )
    items = []
    for item in plan.items:
        route = config.fiber_route_for(*item.endpoints)
        if (
            item.technology is planner.TechnologyKind.FIBER_TRUSTED_RELAY
            and route is not None
            and route.relay_offsets_km
        ):
            if not planner.validate_relay_layout(
                route.length_km, list(route.relay_offsets_km), config.planner.max_span_km
            ):
                raise ConfigError(
                    f"fiber route {route.id!r}: supplied relay layout violates the "
                    f"{config.planner.max_span_km:g} km span limit"
                )
            offsets = route.relay_offsets_km
            boundaries = [0.0, *offsets, route.length_km]
            longest_span = max(b - a for a, b in zip(boundaries, boundaries[1:]))
            budget = lm.fiber_loss(longest_span, config.fiber)
            item = planner.PlanItem(
                demand=item.demand,
                technology=item.technology,
                relay_offsets_km=offsets,
                relay_path=tuple(
                    (f"{item.endpoints[0]}~{item.endpoints[1]}:relay{i}", planner.RelayKind.TRUSTED_NODE)
                    for i in range(len(offsets))
                ),
                budget=budget,
                key_rate_bps=lm.key_rate_estimate(
                    config.planner.source_rate_hz,
                    budget.total_db,
                    config.planner.sifting_factor,
                ),
                orbit_id=None,
            )
        items.append(item)
    return planner.DeploymentPlan(items=tuple(items), infeasible=plan.infeasible)


def cmd_plan(args) -> int:
    config = load_config(args.config)
    plan = build_plan(config)
    plan_dict = planner.plan_to_dict(plan)

    out_dir = args.output or "."
    plan_path = os.path.join(out_dir, "plan.json")
    _atomic_write(plan_path, json.dumps(plan_dict, indent=2, sort_keys=True) + "\n")

    header = ["endpoints", "distance_km", "technology", "relays", "total_db", "key_rate_bps"]
    rows = [
        [
            f"{item.endpoints[0]}:{item.endpoints[1]}",
            f"{item.demand.distance_km:g}",
            item.technology.value,
            len(item.relay_offsets_km) or len(item.relay_path),
            f"{item.budget.total_db:.6g}",
            f"{item.key_rate_bps:.6g}",
        ]
        for item in plan.items
    ]
    sys.stdout.write(_rows_to_table(header, rows) if rows else "empty plan\n")
    print(f"wrote {plan_path}")
    if plan.infeasible:
        for demand, reason in plan.infeasible:
            print(
                f"INFEASIBLE {demand.endpoint_a}:{demand.endpoint_b} "
                f"({demand.distance_km:g} km): {reason}",
                file=sys.stderr,
            )
        return EXIT_INFEASIBLE
    return EXIT_OK


# --- passes ---------------------------------------------------------------


def _window_rows(windows) -> list[list]:
    rows = []
    for station_id, w in windows:
        sid = station_id if isinstance(station_id, str) else "+".join(station_id)
        rows.append(
            [
                sid,
                w.start.isoformat().replace("+00:00", "Z"),
                w.end.isoformat().replace("+00:00", "Z"),
                f"{w.max_elevation_deg:.3f}",
                f"{w.min_slant_range_km:.3f}",
            ]
        )
    return rows


def cmd_passes(args) -> int:
    config = load_config(args.config)
    if not config.orbit_ids:
        raise ConfigError("config declares no orbits")
    orbit_id = args.orbit or config.orbit_ids[0]
    orbit = config.orbit(orbit_id)
    start = orbit.epoch
    end = start + timedelta(hours=args.span_hours)

    windows: list = []
    mode = "single"
    if args.pair:
        mode = "simultaneous"
        sa, sb = config.site(args.pair[0]), config.site(args.pair[1])
        for w in simultaneous_windows(
            orbit, sa, sb, start, end, step_s=args.step_s,
            apply_night=not args.include_day,
        ):
            windows.append((w.station_id, w))
    elif args.sequential:
        mode = "sequential"
        stations = [config.site(s) for s in args.station] if args.station else list(config.sites)
        windows = sequential_contact_plan(
            orbit, stations, start, end, step_s=args.step_s,
            apply_night=not args.include_day,
        )
    else:
        if not args.station:
            raise ConfigError("select --station (repeatable), --pair, or --sequential")
        for sid in args.station:
            station = config.site(sid)
            ws = pass_windows(orbit, station, start, end, step_s=args.step_s)
            if not args.include_day:
                ws = night_filter(ws, station)
            windows.extend((w.station_id, w) for w in ws)
        windows.sort(key=lambda sw: sw[1].start)

    header = ["station", "start_utc", "end_utc", "max_elevation_deg", "min_slant_range_km"]
    rows = _window_rows(windows)
    json_obj = {
        "schema_version": 1,
        "orbit_id": orbit_id,
        "mode": mode,
        "night_filtered": not args.include_day,
        "windows": [
            {
                "station": sid if isinstance(sid, str) else "+".join(sid),
                "start_utc": w.start.isoformat().replace("+00:00", "Z"),
                "end_utc": w.end.isoformat().replace("+00:00", "Z"),
                "max_elevation_deg": round(w.max_elevation_deg, 3),
                "min_slant_range_km": round(w.min_slant_range_km, 3),
            }
            for sid, w in windows
        ],
    }
    _emit(args, f"passes-{orbit_id}", header, rows, json_obj)
    return EXIT_OK


# --- simulate -------------------------------------------------------------


def _contact_plans(
    config: ScenarioConfig, plan: planner.DeploymentPlan
) -> dict[tuple[str, str], list[tuple]]:
    """Night-gated pass windows, in seconds from the simulation start, for
    every satellite plan item whose endpoints are declared sites."""
    passes: dict[tuple[str, str], list[tuple]] = {}
    duration = config.simulation.duration_s
    known_sites = {s.id for s in config.sites}
    for item in plan.items:
        if item.orbit_id is None:
            continue
        a, b = item.endpoints
        if a not in known_sites or b not in known_sites:
            raise ConfigError(
                f"satellite demand {a}:{b} endpoints must be declared sites"
            )
        orbit = config.orbit(item.orbit_id)
        start = orbit.epoch
        end = start + timedelta(seconds=duration)
        sa, sb = config.site(a), config.site(b)
        if item.technology is planner.TechnologyKind.SATELLITE_UNTRUSTED:
            windows = simultaneous_windows(orbit, sa, sb, start, end)
            passes[item.endpoints] = [
                ((w.start - start).total_seconds(), (w.end - start).total_seconds())
                for w in windows
            ]
        else:
            # Lane 0 feeds the (a, sat) pool, lane 1 the (sat, b) pool.
            entries: list[tuple] = []
            for lane, station in enumerate((sa, sb)):
                ws = night_filter(pass_windows(orbit, station, start, end), station)
                entries.extend(
                    (
                        (w.start - start).total_seconds(),
                        (w.end - start).total_seconds(),
                        lane,
                    )
                    for w in ws
                )
            passes[item.endpoints] = entries
    return passes


def _series_csv(report: keysim.SimReport) -> str:
    if not report.series:
        return "t_s\n"
    keys = sorted(k for k in report.series[0] if k != "t_s")
    header = ["t_s"] + keys
    rows = [[snap["t_s"]] + [snap.get(k, "") for k in keys] for snap in report.series]
    return _rows_to_csv(header, rows)


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    out_dir = args.output or "."
    plan_path = args.plan or os.path.join(out_dir, "plan.json")
    try:
        with open(plan_path, "r", encoding="utf-8") as fh:
            plan = planner.plan_from_dict(json.load(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read plan {plan_path!r}: {exc}") from None

    planned_pairs = {item.endpoints for item in plan.items}
    for d in config.simulation.traffic.pair_demands:
        if d.pair not in planned_pairs:
            raise ConfigError(f"traffic pair {d.pair} not present in the plan")

    seed = args.seed if args.seed is not None else config.simulation.seed
    report = keysim.run(
        plan,
        config.simulation.traffic,
        passes=_contact_plans(config, plan),
        duration_s=config.simulation.duration_s,
        seed=seed,
        tick_s=config.simulation.tick_s,
        sample_interval_s=config.simulation.sample_interval_s,
        stochastic=config.simulation.stochastic,
    )

    report_path = os.path.join(out_dir, "sim_report.json")
    series_path = os.path.join(out_dir, "sim_series.csv")
    _atomic_write(report_path, report.to_json() + "\n")
    _atomic_write(series_path, _series_csv(report))

    total_gen = sum(p["generated_bits"] for p in report.pools.values())
    total_consumed = sum(p["consumed_bits"] for p in report.pools.values())
    print(f"simulated {report.duration_s:g} s, seed {report.seed}")
    print(f"generated {total_gen} bits, consumed {total_consumed} bits, "
          f"{len(report.outages)} outage(s)")
    print(f"wrote {report_path}")
    print(f"wrote {series_path}")
    return EXIT_OK


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdplan",
        description="Hybrid QKD network planning and simulation toolkit",
    )
    parser.add_argument(
        "--config",
        default=os.environ.get("QKDPLAN_CONFIG"),
        help="scenario config path (default: $QKDPLAN_CONFIG)",
    )
    parser.add_argument("--output", default=None, help="output directory")
    parser.add_argument(
        "--format", choices=["json", "csv", "table"], default="table"
    )
    parser.add_argument("--seed", type=int, default=None, help="override simulation seed")
    parser.add_argument(
        "--include-day",
        action="store_true",
        help="skip night filtering of satellite windows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_budget = sub.add_parser("budget", help="itemized loss budgets for one link")
    p_budget.add_argument("link", help="fiber route id or 'a:b' demand selector")
    p_budget.set_defaults(func=cmd_budget)

    p_plan = sub.add_parser("plan", help="plan all demands")
    p_plan.set_defaults(func=cmd_plan)

    p_passes = sub.add_parser("passes", help="satellite pass windows")
    p_passes.add_argument("--orbit", default=None, help="orbit id (default: first)")
    p_passes.add_argument("--station", action="append", default=[])
    p_passes.add_argument("--pair", nargs=2, metavar=("A", "B"), default=None)
    p_passes.add_argument("--sequential", action="store_true")
    p_passes.add_argument("--span-hours", type=float, default=24.0)
    p_passes.add_argument("--step-s", type=float, default=10.0)
    p_passes.set_defaults(func=cmd_passes)

    p_sim = sub.add_parser("simulate", help="run the key-generation simulation")
    p_sim.add_argument("--plan", default=None, help="plan.json path")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.config:
        print("error: no config given (use --config or $QKDPLAN_CONFIG)", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        return args.func(args)
    except (ConfigError, GeometryError, lm.LinkModelError, planner.PlannerError,
            keysim.SimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
