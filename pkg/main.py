import math

from fastapi import FastAPI, HTTPException, status

from analysis import compare_to_prediction, fit_power_law, saturation_guard
from config import CODE_VERSION, PROFILE_CACHE_DIR
from equilibrium import critical_frequency_finite_N, load_or_solve
from errors import IKZMError, InsufficientDataError
from models import (CompareRequest, Comparison, FitRequest, FitResult, GroundStateRequest,
                    GroundStateResponse, PredictRequest, PredictResponse)
from predictors import ikzm_report

app = FastAPI(title="Ion Chain Kibble-Zurek API", version=CODE_VERSION)


@app.get("/api/health")
async def health():
    return {"status": "ok", "version": CODE_VERSION}


@app.post("/api/ground-state", response_model=GroundStateResponse)
def ground_state(payload: GroundStateRequest):
    try:
        profile = load_or_solve(payload.n_ions, PROFILE_CACHE_DIR)
    except IKZMError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    return GroundStateResponse(
        n_ions=profile.n_ions,
        positions=[float(v) for v in profile.positions],
        L=profile.L,
        a0=profile.a0,
        omega0=profile.omega0,
        nu_c0=profile.nu_c0_sq ** 0.5,
        nu_c0_finite_N=critical_frequency_finite_N(profile.n_ions) if profile.n_ions >= 3 else None,
    )


@app.post("/api/predict", response_model=PredictResponse)
def predict(payload: PredictRequest):
    try:
        profile = load_or_solve(payload.n_ions, PROFILE_CACHE_DIR)
        delta0 = payload.delta0 if payload.delta0 is not None else payload.delta0_fraction * profile.nu_c0_sq
        report = ikzm_report(profile, delta0, payload.tau_q, payload.eta)
    except IKZMError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    return {"report": {k: (float(v) if math.isfinite(v) else None) for k, v in report.items()}}


@app.post("/api/fit")
async def fit(payload: FitRequest):
    try:
        result: FitResult = fit_power_law(payload.rows, payload.fit_tau_min, payload.fit_tau_max)
    except InsufficientDataError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    saturation = saturation_guard(payload.rows) if len(payload.rows) >= 5 else []
    return {"fit": result.model_dump(), "saturation_tau": saturation}


@app.post("/api/compare", response_model=Comparison)
async def compare(payload: CompareRequest):
    return compare_to_prediction(payload.exponent, payload.regime, payload.geometry, payload.tolerance)
