"""Command-line client for the solver, trainer, and analysis services.

Subcommands run the computation either in-process (default) or against a
running HTTP server (``--server``); either way the CLI owns persistence, so
results land in per-run directories named from the config digest and seed.

Exit codes: 0 on success, 2 when an energy solve fell back to full power
because the outage target is unreachable, 1 on any error.  ``analyze``
exits 1 when any property check fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError
from .runio import run_directory, write_csv, write_json, write_manifest
from .service import (
    SolveRequest,
    analyze_service,
    solve_energy_service,
    solve_perf_service,
    train_service,
)

_ROUTES = {
    "solve-energy": "/solve/energy",
    "solve-perf": "/solve/perf",
    "train": "/train",
    "analyze": "/analyze",
}
_SERVICES = {
    "solve-energy": solve_energy_service,
    "solve-perf": solve_perf_service,
    "train": train_service,
    "analyze": analyze_service,
}
_TRACE_COLUMNS = ["iteration", "iterate", "objective", "step"]
_PLOT_COLUMNS = ["kind", "series", "x", "seed", "metric", "y", "run_id"]
_PLOT_METRICS = [
    "final_test_accuracy",
    "final_train_accuracy",
    "final_train_loss",
    "mean_worker_energy",
    "total_energy",
    "latency",
    "rounds",
    "fallback_fraction",
]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; 2 is reserved for
    infeasible solves, so usage problems exit 1 instead."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(p, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc


def _call(command: str, raw_config: dict, seed: int | None, server: str | None) -> dict:
    """Run one service request, locally or against a server, returning the
    response as a plain dict."""
    if server is None:
        return _SERVICES[command](SolveRequest(config=raw_config, seed=seed)).model_dump()
    import httpx

    reply = httpx.post(
        server.rstrip("/") + _ROUTES[command],
        json={"config": raw_config, "seed": seed},
        timeout=None,
    )
    if reply.status_code != 200:
        try:
            detail = reply.json().get("detail", reply.text)
        except ValueError:
            detail = reply.text
        raise RuntimeError(f"server returned {reply.status_code}: {detail}")
    return reply.json()


def _persist_solve_energy(out_dir: Path, resp: dict) -> None:
    body = {k: v for k, v in resp.items() if k not in ("traces", "config")}
    write_json(out_dir / "plans.json", body)
    rows = [
        {"worker": m, **row}
        for m, trace in enumerate(resp["traces"])
        for row in trace
    ]
    write_csv(out_dir / "trace.csv", rows, columns=["worker"] + _TRACE_COLUMNS)


def _persist_solve_perf(out_dir: Path, resp: dict) -> None:
    body = {k: v for k, v in resp.items() if k not in ("trace", "config")}
    write_json(out_dir / "solution.json", body)
    write_csv(out_dir / "trace.csv", resp["trace"], columns=_TRACE_COLUMNS)


def _persist_train(out_dir: Path, resp: dict) -> None:
    write_json(out_dir / "summary.json", resp["summary"])
    write_csv(out_dir / "rounds.csv", resp["rounds"])


def _persist_analyze(out_dir: Path, resp: dict) -> None:
    write_json(
        out_dir / "report.json", {k: v for k, v in resp.items() if k != "config"}
    )
    write_csv(out_dir / "checks.csv", resp["checks"], columns=["name", "passed", "detail"])


def _run_single(args, command: str) -> int:
    raw = _read_config(args.config)
    resp = _call(command, raw, args.seed, args.server)
    cfg = resp["config"]
    out_dir = run_directory(args.out, command, cfg, cfg["seed"])
    write_manifest(out_dir, command, cfg, cfg["seed"])

    if command == "solve-energy":
        _persist_solve_energy(out_dir, resp)
        for m, plan in enumerate(resp["plans"]):
            tag = "ok" if resp["worker_feasible"][m] else "fallback"
            print(
                f"worker {m}: f={plan['frequency']:.4g} Hz  r={plan['rate']:.6g}  "
                f"P={plan['power']:.4g} W  p_out={plan['outage']:.4g}  "
                f"E={plan['round_energy']:.6g} J  [{tag}]"
            )
        print(
            f"round energy {resp['round_energy']:.6g} J, "
            f"round time {resp['round_time']:.6g} s -> {out_dir}"
        )
        return 0 if resp["feasible"] else 2

    if command == "solve-perf":
        _persist_solve_perf(out_dir, resp)
        print(
            f"T_l*={resp['latency']:.6g} s  objective={resp['objective']:.6g}  "
            f"rounds={resp['rounds']}  converged={resp['converged']} -> {out_dir}"
        )
        return 0

    if command == "train":
        _persist_train(out_dir, resp)
        s = resp["summary"]
        print(
            f"{s['rounds']} rounds at T_l={s['latency']:.6g} s: "
            f"test accuracy {s['final_test_accuracy']:.4f}, "
            f"mean worker energy {s['mean_worker_energy']:.6g} J -> {out_dir}"
        )
        return 0

    _persist_analyze(out_dir, resp)
    for check in resp["checks"]:
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"{mark}  {check['name']}: {check['detail']}")
    print(("all checks passed" if resp["passed"] else "CHECKS FAILED") + f" -> {out_dir}")
    return 0 if resp["passed"] else 1


def _sweep_cases(cfg_base: dict, raw: dict) -> list[dict]:
    """Expand the sweep grid into per-run config overrides with plot labels."""
    kind = cfg_base["sweep.kind"]
    cases = []
    if kind == "energy_grid":
        for p in cfg_base["sweep.p_out_values"]:
            for t in cfg_base["sweep.T_l_values"]:
                cases.append(
                    {
                        "series": f"p_out={p:g}",
                        "x": float(t),
                        "overrides": {
                            "train.plan": "energy",
                            "train.p_out_target": float(p),
                            "train.T_l": float(t),
                        },
                    }
                )
    elif kind == "latency":
        for t in cfg_base["sweep.T_l_values"]:
            cases.append(
                {"series": "T_l", "x": float(t), "overrides": {"train.T_l": float(t)}}
            )
    elif kind == "stochastic":
        for b in cfg_base["sweep.b_values"]:
            cases.append(
                {
                    "series": f"b={b:g}",
                    "x": float(b),
                    "overrides": {
                        "train.mode": "alg2",
                        "train.plan": "energy",
                        "train.b": float(b),
                        "train.p_out_target": "from_b",
                    },
                }
            )
        if cfg_base["sweep.include_full_power"]:
            cases.append(
                {
                    "series": "full_power",
                    "x": 0.0,
                    "overrides": {
                        "train.mode": "alg1",
                        "train.plan": "full_power",
                        "train.b": 0.0,
                        "train.p_out_target": 0.1,
                    },
                }
            )
    else:
        raise ConfigError("sweep.kind", f"unknown sweep kind {kind!r}")
    for case in cases:
        case["config"] = {**raw, **case["overrides"]}
    return cases


def _sweep_metrics(summary: dict) -> dict:
    total_slots = summary["rounds"] * max(len(summary["fallback_rounds"]), 1)
    return {
        "final_test_accuracy": summary["final_test_accuracy"],
        "final_train_accuracy": summary["final_train_accuracy"],
        "final_train_loss": summary["final_train_loss"],
        "mean_worker_energy": summary["mean_worker_energy"],
        "total_energy": summary["total_energy"],
        "latency": summary["latency"],
        "rounds": summary["rounds"],
        "fallback_fraction": float(sum(summary["fallback_rounds"])) / total_slots,
    }


def _run_sweep(args) -> int:
    raw = _read_config(args.config)
    from .config import config_hash, validate_config

    cfg_base = validate_config(raw)
    if args.seed is not None:
        cfg_base["seed"] = int(args.seed)
        raw = {**raw, "seed": int(args.seed)}
    seeds = [int(args.seed)] if args.seed is not None else [
        int(s) for s in cfg_base["sweep.seeds"]
    ]
    cases = _sweep_cases(cfg_base, raw)

    out_dir = run_directory(args.out, "sweep", cfg_base, cfg_base["seed"])
    write_manifest(out_dir, "sweep", cfg_base, cfg_base["seed"])

    jobs = [
        (case, seed)
        for case in cases
        for seed in seeds
    ]

    if args.server is None:
        from .sim import prepare_data

        prepare_data(cfg_base)  # synthesize/load once before going parallel

    def execute(job):
        case, seed = job
        return _call("train", case["config"], seed, args.server)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(execute, job) for job in jobs]
        index_rows, plot_rows = [], []
        failures = 0
        for (case, seed), future in zip(jobs, futures):
            label = f"{case['series']} seed={seed}"
            try:
                resp = future.result()
            except Exception as exc:
                failures += 1
                index_rows.append(
                    {
                        "series": case["series"],
                        "x": case["x"],
                        "seed": seed,
                        "status": "failed",
                        "run_id": "",
                        "error": str(exc),
                    }
                )
                print(f"run {label}: FAILED ({exc})", file=sys.stderr)
                continue
            sub_cfg = resp["config"]
            sub_dir = run_directory(out_dir / "runs", "train", sub_cfg, sub_cfg["seed"])
            write_manifest(sub_dir, "train", sub_cfg, sub_cfg["seed"])
            _persist_train(sub_dir, resp)
            index_rows.append(
                {
                    "series": case["series"],
                    "x": case["x"],
                    "seed": seed,
                    "status": "ok",
                    "run_id": sub_dir.name,
                    "error": "",
                }
            )
            for metric, value in _sweep_metrics(resp["summary"]).items():
                plot_rows.append(
                    {
                        "kind": cfg_base["sweep.kind"],
                        "series": case["series"],
                        "x": case["x"],
                        "seed": seed,
                        "metric": metric,
                        "y": value,
                        "run_id": sub_dir.name,
                    }
                )
            print(f"run {label}: ok -> {sub_dir.name}")

    write_csv(out_dir / "plot_data.csv", plot_rows, columns=_PLOT_COLUMNS)
    write_json(
        out_dir / "summary.json",
        {
            "kind": cfg_base["sweep.kind"],
            "total_runs": len(jobs),
            "failed_runs": failures,
            "runs": index_rows,
        },
    )
    print(f"{len(jobs) - failures}/{len(jobs)} runs ok -> {out_dir}")
    return 0 if failures == 0 else 1


def _run_serve(args) -> int:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="runs", help="output directory root")
        p.add_argument("--jobs", type=int, default=1, help="concurrent sweep runs")
        p.add_argument("--server", default=None, help="base URL of a running service")
        return p

    add("solve-energy", "minimize per-round energy at a fixed latency and outage target")
    add("solve-perf", "choose the round latency maximizing vote quality per sqrt-time")
    add("train", "run one federated training experiment")
    add("analyze", "run the seeded property-check suite")
    add("sweep", "run a grid of training experiments and collect plot data")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _run_serve(args)
        if args.command == "sweep":
            return _run_sweep(args)
        return _run_single(args, args.command)
    except ConfigError as exc:
        print(f"fedsim: config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, OSError, RuntimeError) as exc:
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
