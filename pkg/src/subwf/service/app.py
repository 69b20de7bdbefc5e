"""HTTP service exposing simulation and filtering as endpoints.

Bulk numeric tables come back as text/csv, structured traces as JSON.
Error mapping: invalid configuration -> 400, numerical failure (tolerance,
iteration caps, degenerate importance weights, rejection exhaustion) ->
409; both carry a machine-readable {"error": {"type", "message"}} body.
All randomized endpoints take an explicit seed, so identical requests
return identical bytes.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..clocks import ClockKind, Family, clock_laplace
from ..dual import (
    DualWeightQuery,
    dual_path_sample,
    unconditional_weight_table,
)
from ..errors import ConfigError, NumericalError
from ..filtering import (
    clock_posterior_sample,
    filter_markov,
    nonmarkov_filter,
    smooth,
)
from ..sampler import (
    Mode,
    sampling_status,
    swf_path_sample,
    swf_transition_batch,
)
from ..serialization import (
    mixture_to_rows,
    model_from_dict,
    observations_from_csv,
    observations_to_csv,
    trace_to_dict,
)
from ..filtering import ObservationRecord
from ..wf import lambda_n, multinomial_sample
from .schemas import (
    ClockPosteriorRequest,
    DualPathRequest,
    DualWeightsRequest,
    EigenDecayRequest,
    FilterRequest,
    HealthResponse,
    NonMarkovFilterRequest,
    SampleTransitionRequest,
    SimulatePathRequest,
    SmoothRequest,
    SynthDataRequest,
)

_MODES = {"A": Mode.OPTION_A, "B": Mode.OPTION_B, "auto": Mode.AUTO}


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _csv_response(text: str) -> PlainTextResponse:
    return PlainTextResponse(text, media_type="text/csv")


def create_app() -> FastAPI:
    app = FastAPI(title="subwf", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(
            status_code=400,
            content={"error": {"type": "config", "message": str(exc)}},
        )

    @app.exception_handler(NumericalError)
    async def _numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(
            status_code=409,
            content={"error": {"type": "numerical", "message": str(exc)}},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/eigen-decay")
    def eigen_decay(req: EigenDecayRequest):
        model = model_from_dict(req.model.to_dict())
        clock = model.clock
        th_tot = model.theta.total
        ml_column = (
            req.volterra_check
            and clock.kind is ClockKind.INVERSE
            and clock.family.family is Family.STABLE
            and clock.family.beta == 0.0
        )
        header = ["t"] + [f"phi_n{n}" for n in req.indices]
        if ml_column:
            header += [f"phi_ml_n{n}" for n in req.indices]
        rows = []
        for t in req.t_grid:
            row: list = [repr(float(t))]
            # numerical route where one exists; for inverse-stable clocks the
            # main column is forced through the Volterra solver so the
            # analytic Mittag-Leffler column is an independent check
            for n in req.indices:
                lam = lambda_n(th_tot, n)
                method = "volterra" if ml_column and t > 0 else "auto"
                row.append(repr(clock_laplace(clock, float(t), lam, req.tol, method)))
            if ml_column:
                for n in req.indices:
                    lam = lambda_n(th_tot, n)
                    row.append(repr(clock_laplace(clock, float(t), lam, req.tol)))
            rows.append(row)
        return _csv_response(_csv_text(header, rows))

    @app.post("/dual-weights")
    def dual_weights(req: DualWeightsRequest):
        model = model_from_dict(req.model.to_dict())
        query = DualWeightQuery(
            model.theta.total, model.clock, req.t, req.start_total
        )
        table = unconditional_weight_table(query, req.tol, req.mass_tol)
        total = float(table.sum())
        if abs(total - 1.0) > 1e-8 and req.start_total is not None:
            raise NumericalError(f"weight table sums to {total!r}")
        rows = [[m, repr(float(w))] for m, w in enumerate(table)]
        return _csv_response(_csv_text(["m", "weight"], rows))

    @app.post("/dual-path")
    def dual_path(req: DualPathRequest):
        model = model_from_dict(req.model.to_dict())
        rng = np.random.default_rng(req.seed)
        dim = model.theta.dim
        header = ["path", "t"] + [f"z{i+1}" for i in range(dim)]
        rows = []
        for p in range(req.n_paths):
            states = dual_path_sample(
                model.theta.total, model.clock, req.start, req.times, rng,
                req.grid_step,
            )
            for t, state in zip(req.times, states):
                rows.append([p, repr(float(t))] + [int(v) for v in state])
        return _csv_response(_csv_text(header, rows))

    @app.post("/sample-transition")
    def sample_transition(req: SampleTransitionRequest):
        model = model_from_dict(req.model.to_dict())
        rng = np.random.default_rng(req.seed)
        draws, status = swf_transition_batch(
            model, req.x, req.t, req.n, _MODES[req.mode], rng, req.grid_step
        )
        dim = model.theta.dim
        header = [f"x{i+1}" for i in range(dim)]
        rows = [[repr(float(v)) for v in row] for row in draws]
        text = _csv_text(header, rows)
        resp = _csv_response(text)
        resp.headers["X-Subwf-Mode"] = status.mode.value
        resp.headers["X-Subwf-Exact"] = str(status.exact).lower()
        if status.warning:
            resp.headers["X-Subwf-Warning"] = status.warning
        return resp

    @app.post("/simulate-path")
    def simulate_path(req: SimulatePathRequest):
        model = model_from_dict(req.model.to_dict())
        rng = np.random.default_rng(req.seed)
        dim = model.theta.dim
        header = ["path", "t"] + [f"x{i+1}" for i in range(dim)]
        rows = []
        for p in range(req.n_paths):
            path = swf_path_sample(
                model, req.times, rng, _MODES[req.mode], req.grid_step,
                req.min_op_gap,
            )
            for t, state in zip(req.times, path):
                rows.append([p, repr(float(t))] + [repr(float(v)) for v in state])
        return _csv_response(_csv_text(header, rows))

    @app.post("/synth-data")
    def synth_data(req: SynthDataRequest):
        model = model_from_dict(req.model.to_dict())
        if req.emission_total <= 0:
            raise ConfigError("emission_total must be positive")
        rng = np.random.default_rng(req.seed)
        path = swf_path_sample(
            model, req.times, rng, _MODES[req.mode], req.grid_step, req.min_op_gap
        )
        records = []
        for t, state in zip(req.times, path):
            y = multinomial_sample(req.emission_total, state, rng)
            records.append(ObservationRecord(float(t), tuple(int(v) for v in y)))
        return _csv_response(observations_to_csv(records))

    @app.post("/filter")
    def run_filter(req: FilterRequest):
        model = model_from_dict(req.model.to_dict())
        data = observations_from_csv(req.data_csv)
        trace = filter_markov(model, data, req.tol)
        return trace_to_dict(trace, model.theta)

    @app.post("/smooth")
    def run_smooth(req: SmoothRequest):
        model = model_from_dict(req.model.to_dict())
        data = observations_from_csv(req.data_csv)
        mixtures = smooth(model, data, req.tol)
        return {
            "theta": list(model.theta.values),
            "smoothed": [
                {"t": rec.time, "mixture": mixture_to_rows(mix)}
                for rec, mix in zip(data, mixtures)
            ],
        }

    @app.post("/nonmarkov-filter")
    def run_nonmarkov_filter(req: NonMarkovFilterRequest):
        model = model_from_dict(req.model.to_dict())
        data = observations_from_csv(req.data_csv)
        rng = np.random.default_rng(req.seed)
        trace = nonmarkov_filter(
            model,
            data,
            n_clock_draws=req.clock_draws,
            tol=req.tol,
            rng=rng,
            method=req.method,
            ess_floor=req.ess_floor,
            max_attempts=req.max_attempts,
            grid_step=req.grid_step,
        )
        return trace_to_dict(trace, model.theta)

    @app.post("/clock-posterior")
    def run_clock_posterior(req: ClockPosteriorRequest):
        model = model_from_dict(req.model.to_dict())
        data = observations_from_csv(req.data_csv)
        rng = np.random.default_rng(req.seed)
        draws = []
        attempts_total = 0
        for _ in range(req.n):
            s = clock_posterior_sample(
                model, data, rng, req.max_attempts, req.tol, req.grid_step
            )
            attempts_total += s.attempts
            draws.append(
                {
                    "r": [float(v) for v in s.r],
                    "attempts": s.attempts,
                    "log_likelihood": s.log_likelihood,
                }
            )
        return {
            "times": [rec.time for rec in data],
            "draws": draws,
            "acceptance_rate": req.n / attempts_total if attempts_total else math.nan,
        }

    return app


app = create_app()
