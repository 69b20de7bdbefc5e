"""Batch command-line front end.

Every command is a thin client of the HTTP service: it assembles a
request, sends it through the FastAPI app (in-process by default, or to a
remote ``--server`` URL), writes the returned artifact to ``--out``, and
drops a JSON run manifest next to it (config echo, seed, versions, worker
count, wall time).

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(tolerance or iteration caps), 4 I/O error.  Failures also emit a
machine-readable error JSON on stderr.
"""

from __future__ import annotations

import json
import platform
import sys
import time
from pathlib import Path

import click
import httpx

from . import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process mode: drive the ASGI app through starlette's blocking
    # portal (httpx's own ASGITransport is async-only)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _fail(kind: str, message: str, code: int):
    click.echo(json.dumps({"error": {"type": kind, "message": message}}), err=True)
    sys.exit(code)


def _load_json_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        _fail("io", f"cannot read {path}: {exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        _fail("config", f"{path} is not valid JSON: {exc}", EXIT_CONFIG)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail("io", f"cannot read {path}: {exc}", EXIT_IO)


def _parse_floats(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            _fail("config", f"range syntax is start:stop:step, got {text!r}", EXIT_CONFIG)
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            _fail("config", "range step must be positive", EXIT_CONFIG)
        out = []
        v = start
        while v <= stop + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        _fail("config", f"bad numeric list {text!r}: {exc}", EXIT_CONFIG)


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        _fail("config", f"bad integer list {text!r}: {exc}", EXIT_CONFIG)


def _post(ctx_obj: dict, path: str, payload: dict) -> httpx.Response:
    try:
        with _client(ctx_obj.get("server")) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        _fail("io", f"cannot reach service: {exc}", EXIT_IO)
    if resp.status_code in (400, 422):
        try:
            message = resp.json().get("error", {}).get("message", resp.text)
        except ValueError:
            message = resp.text
        _fail("config", message, EXIT_CONFIG)
    if resp.status_code == 409:
        _fail("numerical", resp.json()["error"]["message"], EXIT_NUMERICAL)
    if resp.status_code != 200:
        _fail("io", f"service returned HTTP {resp.status_code}: {resp.text}", EXIT_IO)
    return resp


def _write_output(out: str, content: bytes):
    try:
        Path(out).write_bytes(content)
    except OSError as exc:
        _fail("io", f"cannot write {out}: {exc}", EXIT_IO)


def _write_manifest(
    out: str, command: str, payload: dict, wall_time: float, workers: int,
    extra: dict | None = None,
):
    manifest = {
        "command": command,
        "config": payload,
        "seed": payload.get("seed"),
        "workers": workers,
        "versions": {
            "subwf": __version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall_time,
        "output": out,
    }
    if extra:
        manifest.update(extra)
    path = out + ".manifest.json"
    try:
        Path(path).write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )
    except OSError as exc:
        _fail("io", f"cannot write {path}: {exc}", EXIT_IO)


def _run(ctx: click.Context, endpoint: str, payload: dict, out: str, as_json: bool):
    start = time.monotonic()
    resp = _post(ctx.obj, endpoint, payload)
    if as_json:
        content = json.dumps(resp.json(), indent=2, sort_keys=True).encode() + b"\n"
    else:
        content = resp.content
    _write_output(out, content)
    extra = {}
    for key in ("x-subwf-mode", "x-subwf-exact", "x-subwf-warning"):
        if key in resp.headers:
            extra[key.replace("x-subwf-", "sampling_")] = resp.headers[key]
    _write_manifest(
        out,
        endpoint.strip("/"),
        payload,
        time.monotonic() - start,
        ctx.obj.get("workers", 1),
        extra or None,
    )
    if "x-subwf-warning" in resp.headers:
        click.echo(f"warning: {resp.headers['x-subwf-warning']}", err=True)
    click.echo(out)


@click.group()
@click.option("--server", default=None, help="remote service URL (default: in-process)")
@click.option("--workers", default=1, show_default=True, help="Monte Carlo worker count recorded in manifests")
@click.pass_context
def main(ctx: click.Context, server: str | None, workers: int):
    """Simulation and filtering for randomly time-changed Dirichlet signals."""
    ctx.obj = {"server": server, "workers": workers}


@main.command("eigen-decay")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--indices", default="1,2,5", show_default=True, help="eigenvalue indices n")
@click.option("--t-grid", default="0.1:2.0:0.1", show_default=True)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_context
def eigen_decay(ctx, model_path, indices, t_grid, tol, out):
    """Table of Phi_t(lambda_n) over a time grid (CSV)."""
    payload = {
        "model": _load_json_file(model_path),
        "indices": _parse_ints(indices),
        "t_grid": _parse_floats(t_grid),
        "tol": tol,
    }
    _run(ctx, "/eigen-decay", payload, out, as_json=False)


@main.command("dual-weights")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--t", required=True, type=float)
@click.option("--start-total", default=None, type=int, help="conditional start total n")
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_context
def dual_weights(ctx, model_path, t, start_total, tol, out):
    """Dual-total weight table (CSV: m, weight)."""
    payload = {
        "model": _load_json_file(model_path),
        "t": t,
        "start_total": start_total,
        "tol": tol,
    }
    _run(ctx, "/dual-weights", payload, out, as_json=False)


@main.command("dual-path")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--start", required=True, type=str, help="start counts, e.g. 15,15")
@click.option("--times", default="0:2:0.1", show_default=True)
@click.option("--n", default=1, show_default=True, help="number of paths")
@click.option("--seed", default=0, show_default=True)
@click.option("--grid-step", default=None, type=float)
@click.option("--out", required=True, type=str)
@click.pass_context
def dual_path(ctx, model_path, start, times, n, seed, grid_step, out):
    """Time-indexed dual trajectories (CSV)."""
    payload = {
        "model": _load_json_file(model_path),
        "start": _parse_ints(start),
        "times": _parse_floats(times),
        "n_paths": n,
        "seed": seed,
        "grid_step": grid_step,
    }
    _run(ctx, "/dual-path", payload, out, as_json=False)


@main.command("sample-transition")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--x", required=True, type=str, help="start point, e.g. 0.5,0.5")
@click.option("--t", required=True, type=float)
@click.option("--n", default=1, show_default=True)
@click.option("--mode", default="auto", show_default=True, type=click.Choice(["A", "B", "auto"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--grid-step", default=None, type=float)
@click.option("--out", required=True, type=str)
@click.pass_context
def sample_transition(ctx, model_path, x, t, n, mode, seed, grid_step, out):
    """Draws from the transition kernel (CSV)."""
    payload = {
        "model": _load_json_file(model_path),
        "x": _parse_floats(x),
        "t": t,
        "n": n,
        "mode": mode,
        "seed": seed,
        "grid_step": grid_step,
    }
    _run(ctx, "/sample-transition", payload, out, as_json=False)


@main.command("simulate-path")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--times", required=True, type=str)
@click.option("--n", default=1, show_default=True, help="number of paths")
@click.option("--mode", default="auto", show_default=True, type=click.Choice(["A", "B", "auto"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--grid-step", default=None, type=float)
@click.option("--min-op-gap", default=0.1, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_context
def simulate_path(ctx, model_path, times, n, mode, seed, grid_step, min_op_gap, out):
    """Signal paths on a time grid (CSV)."""
    payload = {
        "model": _load_json_file(model_path),
        "times": _parse_floats(times),
        "n_paths": n,
        "mode": mode,
        "seed": seed,
        "grid_step": grid_step,
        "min_op_gap": min_op_gap,
    }
    _run(ctx, "/simulate-path", payload, out, as_json=False)


@main.command("synth-data")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--times", required=True, type=str)
@click.option("--emission-total", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--mode", default="auto", show_default=True, type=click.Choice(["A", "B", "auto"]))
@click.option("--out", required=True, type=str)
@click.pass_context
def synth_data(ctx, model_path, times, emission_total, seed, mode, out):
    """Simulate a signal path and multinomial observations (CSV dataset)."""
    payload = {
        "model": _load_json_file(model_path),
        "times": _parse_floats(times),
        "emission_total": emission_total,
        "seed": seed,
        "mode": mode,
    }
    _run(ctx, "/synth-data", payload, out, as_json=False)


@main.command("filter")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--data", "data_path", required=True, type=str)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_context
def run_filter(ctx, model_path, data_path, tol, out):
    """Forward filter for subordinator-clock models (JSON trace)."""
    payload = {
        "model": _load_json_file(model_path),
        "data_csv": _read_text(data_path),
        "tol": tol,
    }
    _run(ctx, "/filter", payload, out, as_json=True)


@main.command("smooth")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--data", "data_path", required=True, type=str)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--out", required=True, type=str)
@click.pass_context
def run_smooth(ctx, model_path, data_path, tol, out):
    """Smoothing marginals for subordinator-clock models (JSON)."""
    payload = {
        "model": _load_json_file(model_path),
        "data_csv": _read_text(data_path),
        "tol": tol,
    }
    _run(ctx, "/smooth", payload, out, as_json=True)


@main.command("nonmarkov-filter")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--data", "data_path", required=True, type=str)
@click.option("--clock-draws", default=1000, show_default=True)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--exact-rejection", is_flag=True, help="use the exact rejection sampler instead of importance sampling")
@click.option("--ess-floor", default=25.0, show_default=True)
@click.option("--max-attempts", default=100000, show_default=True)
@click.option("--grid-step", default=None, type=float)
@click.option("--out", required=True, type=str)
@click.pass_context
def run_nonmarkov_filter(
    ctx, model_path, data_path, clock_draws, tol, seed, exact_rejection,
    ess_floor, max_attempts, grid_step, out,
):
    """Clock-averaged filter for inverse/composed-clock models (JSON trace)."""
    payload = {
        "model": _load_json_file(model_path),
        "data_csv": _read_text(data_path),
        "clock_draws": clock_draws,
        "tol": tol,
        "seed": seed,
        "method": "rejection" if exact_rejection else "is",
        "ess_floor": ess_floor,
        "max_attempts": max_attempts,
        "grid_step": grid_step,
    }
    _run(ctx, "/nonmarkov-filter", payload, out, as_json=True)


@main.command("clock-posterior")
@click.option("--model", "model_path", required=True, type=str)
@click.option("--data", "data_path", required=True, type=str)
@click.option("--n", default=100, show_default=True, help="number of accepted draws")
@click.option("--seed", default=0, show_default=True)
@click.option("--max-attempts", default=100000, show_default=True)
@click.option("--grid-step", default=None, type=float)
@click.option("--out", required=True, type=str)
@click.pass_context
def run_clock_posterior(ctx, model_path, data_path, n, seed, max_attempts, grid_step, out):
    """Exact clock-path posterior draws by rejection (JSON)."""
    payload = {
        "model": _load_json_file(model_path),
        "data_csv": _read_text(data_path),
        "n": n,
        "seed": seed,
        "max_attempts": max_attempts,
        "grid_step": grid_step,
    }
    _run(ctx, "/clock-posterior", payload, out, as_json=True)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
