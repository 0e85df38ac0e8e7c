"""Command-line client for the analysis/simulation service.

Every data-producing subcommand builds a request model and posts it to
the service API -- by default against the in-process app (no server
needed), or against a remote instance given ``--server``.  Results come
back in the response body and are written locally.

Exit codes: 0 success, 2 configuration error, 3 simulation crash,
4 I/O error.
"""

from __future__ import annotations

import argparse
import asyncio
import concurrent.futures
import itertools
import json
import sys
from pathlib import Path

import httpx

from .output import OutputError, write_text
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CRASH = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _post(path: str, payload: dict, server: str | None) -> dict:
    """POST to the service: remote when --server is given, else in-process."""
    try:
        if server:
            resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
        else:
            from .service import app

            async def _call():
                transport = httpx.ASGITransport(app=app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://copterftc", timeout=None
                ) as client:
                    return await client.post(path, json=payload)

            resp = asyncio.run(_call())
    except httpx.HTTPError as exc:
        raise CliError(f"service request failed: {exc}", EXIT_IO) from exc
    if resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        raise CliError(f"configuration rejected: {detail}", EXIT_CONFIG)
    if resp.status_code != 200:
        raise CliError(f"service error {resp.status_code}: {resp.text}", EXIT_IO)
    return resp.json()


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", EXIT_IO) from exc
    return out


def _load_scenario_arg(args) -> dict:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    if getattr(args, "seed", None) is not None:
        scenario.sim.seed = args.seed
    return scenario.model_dump(mode="json")


def _maybe_vehicle(args) -> dict | None:
    if args.scenario is None:
        return None
    try:
        return load_scenario(args.scenario).vehicle.model_dump(mode="json")
    except ScenarioError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc


def cmd_analyze_acai(args) -> int:
    want_csv = args.format in ("csv", "both")
    want_svg = args.format in ("svg", "both")
    payload = {
        "vehicle": _maybe_vehicle(args),
        "config": args.config,
        "max_failures": args.failures,
        "include_csv": want_csv,
        "include_svg": want_svg,
    }
    data = _post("/analyze/acai", payload, args.server)
    out = _out_dir(args)
    stem = f"acai_{data['config']}"
    if want_csv:
        write_text(out / f"{stem}.csv", data["csv"])
    if want_svg:
        write_text(out / f"{stem}.svg", data["svg"])
    uncontrollable = [c["failure_set"] for c in data["singles"] + data["pairs"] if not c["controllable"]]
    print(f"{data['config']}: nominal rho = {data['nominal']['rho']:.6g}")
    print(f"uncontrollable failure sets: {uncontrollable or 'none'}")
    print(f"wrote {stem}.* to {out}")
    return EXIT_OK


def cmd_analyze_arcai(args) -> int:
    want_csv = args.format in ("csv", "both")
    want_svg = args.format in ("svg", "both")
    payload = {
        "vehicle": _maybe_vehicle(args),
        "config": args.config,
        "include_csv": want_csv,
        "include_svg": want_svg,
    }
    data = _post("/analyze/arcai", payload, args.server)
    out = _out_dir(args)
    stem = f"arcai_{data['config']}"
    if want_csv:
        write_text(out / f"{stem}.csv", data["csv"])
    if want_svg:
        write_text(out / f"{stem}.svg", data["svg"])
    print(f"{data['config']}: rows {', '.join(data['row_labels'])}")
    for ch in ("full", "phi", "theta", "psi"):
        vals = ", ".join(f"{v:+.4f}" for v in data[ch])
        print(f"  {ch:>5}: {vals}")
    print(f"wrote {stem}.* to {out}")
    return EXIT_OK


def _write_sim_outputs(data: dict, out: Path, fmt: str) -> None:
    name = data["summary"]["name"]
    if fmt in ("csv", "both") and data.get("csv"):
        write_text(out / f"{name}.csv", data["csv"])
    if fmt in ("svg", "both") and data.get("svg"):
        write_text(out / f"{name}.svg", data["svg"])
    write_text(out / f"{name}_summary.json", json.dumps(data["summary"], indent=2) + "\n")


def cmd_simulate(args) -> int:
    payload = {
        "scenario": _load_scenario_arg(args),
        "include_csv": args.format in ("csv", "both"),
        "include_svg": args.format in ("svg", "both"),
    }
    data = _post("/simulate", payload, args.server)
    out = _out_dir(args)
    _write_sim_outputs(data, out, args.format)
    s = data["summary"]
    print(f"{s['name']}: status={s['status']} final_mode={s['final_mode']}")
    if s["detections"]:
        det = ", ".join(f"rotor {d['rotor']} @ {d['time_s']:.3f}s" for d in s["detections"])
        print(f"detections: {det}")
    print(f"max position error {s['max_pos_error_m']:.3f} m; wrote results to {out}")
    if s["status"] != "completed":
        print(f"run ended early: {s['crash_reason']} at t={s['crash_time_s']}", file=sys.stderr)
        return EXIT_CRASH
    return EXIT_OK


def _sweep_variant(base: dict, failure_set: tuple[int, ...], fault_time: float) -> dict:
    scenario = json.loads(json.dumps(base))
    scenario["faults"] = [{"time_s": fault_time, "rotor": r} for r in failure_set]
    tag = "nominal" if not failure_set else "f" + "-".join(str(r) for r in failure_set)
    scenario["name"] = f"{base.get('name', 'scenario')}__{tag}"
    return scenario


def _run_sweep_variant(payload: dict) -> dict:
    # executed inside worker processes: call the service handler directly
    from .service import SimulateRequest, simulate_payload

    return simulate_payload(SimulateRequest.model_validate(payload)).model_dump(mode="json")


def cmd_sweep(args) -> int:
    base = _load_scenario_arg(args)
    n = (
        len(base["vehicle"]["config"])
        if base["vehicle"].get("config")
        else len(base["vehicle"]["rotors"])
    )
    rotors = range(1, n + 1)
    failure_sets: list[tuple[int, ...]] = [()]
    for depth in range(1, args.failures + 1):
        failure_sets += list(itertools.combinations(rotors, depth))
    include_csv = args.format in ("csv", "both")
    payloads = [
        {
            "scenario": _sweep_variant(base, fs, args.fault_time),
            "include_csv": include_csv,
            "include_svg": False,
        }
        for fs in failure_sets
    ]

    out = _out_dir(args)
    results = []
    if args.server:
        for payload in payloads:
            results.append(_post("/simulate", payload, args.server))
    else:
        workers = args.workers or min(len(payloads), 4)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_sweep_variant, payloads))

    rows = ["name,failure_set,status,final_mode,detections,max_pos_error_m"]
    worst_code = EXIT_OK
    for fs, data in zip(failure_sets, results):
        _write_sim_outputs(data, out, args.format)
        s = data["summary"]
        det = ";".join(f"{d['rotor']}@{d['time_s']:.3f}" for d in s["detections"])
        rows.append(
            f"{s['name']},{'-'.join(map(str, fs)) or 'none'},{s['status']},"
            f"{s['final_mode']},{det},{s['max_pos_error_m']:.9g}"
        )
        print(f"{s['name']}: {s['status']} ({s['final_mode']})")
        if s["status"] != "completed":
            worst_code = EXIT_CRASH
    write_text(out / "sweep_summary.csv", "\n".join(rows) + "\n")
    print(f"wrote {len(results)} runs and sweep_summary.csv to {out}")
    return worst_code


def cmd_plot(args) -> int:
    try:
        frame_text = Path(args.log).read_text()
    except OSError as exc:
        raise CliError(f"cannot read log {args.log}: {exc}", EXIT_IO) from exc
    data = _post("/plot", {"csv": frame_text, "title": Path(args.log).stem}, args.server)
    out = _out_dir(args)
    target = out / (Path(args.log).stem + ".svg")
    write_text(target, data["svg"])
    print(f"wrote {target}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copterftc",
        description="Controllability analysis and fault-tolerant control "
        "simulation for co-planar multicopters",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service instance (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario_required=False, with_seed=False):
        p.add_argument(
            "--scenario",
            required=scenario_required,
            default=None,
            help="scenario YAML file" + ("" if scenario_required else " (default: packaged vehicle)"),
        )
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument(
            "--format",
            choices=("csv", "svg", "both"),
            default="csv",
            help="which artifacts to write (default: csv)",
        )
        if with_seed:
            p.add_argument("--seed", type=int, default=None, help="override the scenario RNG seed")

    p = sub.add_parser("analyze-acai", help="failure grid of the hover authority index")
    add_common(p)
    p.add_argument("--config", default=None, help="spin string override, e.g. PNPNPN")
    p.add_argument("--failures", type=int, default=2, choices=(1, 2), help="failure depth")
    p.set_defaults(func=cmd_analyze_acai)

    p = sub.add_parser("analyze-arcai", help="reduced-authority table for single failures")
    add_common(p)
    p.add_argument("--config", default=None, help="spin string override, e.g. PNPNPN")
    p.set_defaults(func=cmd_analyze_arcai)

    p = sub.add_parser("simulate", help="run one scenario")
    add_common(p, scenario_required=True, with_seed=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a scenario plus fault-injected variants")
    add_common(p, scenario_required=True, with_seed=True)
    p.add_argument("--failures", type=int, default=1, choices=(1, 2), help="failure depth")
    p.add_argument(
        "--fault-time", type=float, default=30.0, help="injection time for swept faults [s]"
    )
    p.add_argument("--workers", type=int, default=None, help="parallel workers (local mode)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a log CSV to SVG panels")
    p.add_argument("--log", required=True, help="log CSV produced by simulate")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
