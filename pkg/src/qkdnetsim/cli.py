"""Command-line front end.

Subcommands: ``validate`` (parse and check a scenario), ``run`` (execute a
scenario file), ``preset`` (run a built-in network by name), ``sweep`` (run a
seed range, one output directory per seed). Reports are written as CSV (or a
JSON mirror) plus rendered PNG figures; one machine-parseable summary line
per link goes to standard output.

Exit codes are stable: 0 success, 1 scenario or runtime error, 2 usage.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import metrics, report, simcore, topology

PRESETS = {"venqci": topology.venqci_preset}

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdnetsim",
        description="Deterministic simulator for switched multi-node QKD networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument(
            "--duration", default=None, help="override the simulated duration (suffixes: s, m, h, d)"
        )
        p.add_argument(
            "--out",
            default=None,
            help="output directory (default: $QKDNETSIM_OUT or ./out)",
        )
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")
        p.add_argument("--figures", dest="figures", action="store_true", default=True)
        p.add_argument("--no-figures", dest="figures", action="store_false", help="skip PNG rendering")
        p.add_argument("--debug", action="store_true", help="check engine invariants on every event")
        p.add_argument("--snapshot", default=None, help="also write the full run result as JSON here")
        p.add_argument("--key-log", action="store_true", help="also write key_events.csv")
        p.add_argument(
            "--dump-keys",
            action="store_true",
            help="include delivered key material (hex) in key_events.csv; implies --key-log",
        )

    p_validate = sub.add_parser("validate", help="parse and check a scenario file")
    p_validate.add_argument("scenario")

    p_run = sub.add_parser("run", help="run a scenario file and write reports")
    p_run.add_argument("scenario")
    p_run.add_argument("--control", default=None, help="YAML control script (set-policy / force-switch / get-status)")
    add_run_flags(p_run)

    p_preset = sub.add_parser("preset", help="run a built-in network preset")
    p_preset.add_argument("name", choices=sorted(PRESETS))
    p_preset.add_argument("--dump-scenario", default=None, help="write the preset scenario file and exit")
    p_preset.add_argument("--control", default=None, help="YAML control script")
    add_run_flags(p_preset)

    p_sweep = sub.add_parser("sweep", help="run a seed range, one output directory per seed")
    p_sweep.add_argument("scenario", nargs="?", default=None)
    p_sweep.add_argument("--preset", dest="preset_name", choices=sorted(PRESETS), default=None)
    p_sweep.add_argument("--seeds", required=True, help="inclusive range A:B or comma list")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--figures", dest="figures", action="store_true", default=False)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


def _default_out(explicit: str | None) -> str:
    if explicit:
        return explicit
    return os.environ.get("QKDNETSIM_OUT", "out")


def _parse_seeds(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in spec.split(",") if x.strip()]


def _apply_overrides(scenario: topology.Scenario, args: argparse.Namespace) -> topology.Scenario:
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.duration is not None:
        scenario = replace(scenario, duration=topology.parse_duration(args.duration, "--duration"))
    return scenario


def _write_reports(result: simcore.RunResult, outdir: str, fmt: str, figures: bool) -> metrics.Aggregates:
    agg = metrics.aggregate(result)
    if fmt == "json":
        metrics.export_json(agg, outdir)
    else:
        metrics.export_csv(agg, outdir)
    if figures:
        report.render_figures(agg, outdir)
    return agg


def _run_one(scenario: topology.Scenario, args: argparse.Namespace, control) -> int:
    outdir = _default_out(args.out)
    result = simcore.run(scenario, debug=args.debug, control=control, dump_keys=args.dump_keys)
    agg = _write_reports(result, outdir, args.format, args.figures)
    if args.key_log or args.dump_keys:
        metrics.export_key_events(result, outdir, include_material=args.dump_keys)
    if args.snapshot:
        with open(args.snapshot, "wb") as fh:
            fh.write(result.to_json_bytes())
    for line in metrics.summary_lines(agg):
        print(line)
    for status in result.status_reports:
        print(
            f"status t={status.time_us / 1e6:.3f} agent={status.agent} phase={status.phase} "
            f"active={status.active_link} buffers={status.buffers}"
        )
    return EXIT_OK


def _sweep_worker(payload: tuple) -> str:
    scenario_text, seed, outdir, fmt, figures = payload
    scenario = topology.parse_scenario(scenario_text)
    scenario = replace(scenario, seed=seed)
    result = simcore.run(scenario)
    _write_reports(result, outdir, fmt, figures)
    return outdir


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            topology.load_scenario(args.scenario)
            print(f"ok: {args.scenario}")
            return EXIT_OK

        if args.command == "run":
            scenario = topology.load_scenario(args.scenario)
            scenario = _apply_overrides(scenario, args)
            control = None
            if args.control:
                with open(args.control, "r", encoding="utf-8") as fh:
                    control = simcore.parse_control_script(fh.read(), scenario)
            return _run_one(scenario, args, control)

        if args.command == "preset":
            scenario = PRESETS[args.name]()
            scenario = _apply_overrides(scenario, args)
            if args.dump_scenario:
                with open(args.dump_scenario, "w", encoding="utf-8") as fh:
                    fh.write(topology.serialize_scenario(scenario))
                print(f"wrote {args.dump_scenario}")
                return EXIT_OK
            control = None
            if args.control:
                with open(args.control, "r", encoding="utf-8") as fh:
                    control = simcore.parse_control_script(fh.read(), scenario)
            return _run_one(scenario, args, control)

        if args.command == "sweep":
            if (args.scenario is None) == (args.preset_name is None):
                parser.error("sweep needs a scenario file or --preset, not both")
            if args.preset_name:
                scenario_text = topology.serialize_scenario(PRESETS[args.preset_name]())
            else:
                with open(args.scenario, "r", encoding="utf-8") as fh:
                    scenario_text = fh.read()
            topology.parse_scenario(scenario_text)  # fail fast before forking
            base = _default_out(args.out)
            seeds = _parse_seeds(args.seeds)
            payloads = [
                (scenario_text, seed, os.path.join(base, f"seed-{seed}"), args.format, args.figures)
                for seed in seeds
            ]
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    for outdir in pool.map(_sweep_worker, payloads):
                        print(f"done {outdir}")
            else:
                for payload in payloads:
                    print(f"done {_sweep_worker(payload)}")
            return EXIT_OK

        parser.error(f"unknown command {args.command!r}")
    except (topology.ScenarioSyntaxError, topology.ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
