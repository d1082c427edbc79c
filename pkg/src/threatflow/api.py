"""HTTP facade over the analysis pipeline for the what-if UI.

Endpoints list scenarios and threats, run an analysis, and diff a what-if
variant. Analyses run synchronously inside the request (bounded server-side
to stay desk-scale); every run is cached in memory under a run id so the
graph rendering and re-fetches need no recomputation. Status codes: 400 for
a malformed body or bad bounds, 404 for unknown scenarios and runs, 422 for
unknown toggle ids and mitigation names.
"""

from __future__ import annotations

import glob
import itertools
import os
import threading
from dataclasses import replace
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, ConfigDict

from .analysis import (
    AnalysisError,
    ExploreBounds,
    InvalidScenario,
    Scenario,
    UnknownToggle,
    load_scenario,
    run_scenario,
    speculate,
    to_dot,
)
from .ingest import CatalogStore, default_catalog_path
from .threats import CIA_AXES, ThreatDefinition, UnknownMitigation

_BOUNDS_CAP = ExploreBounds(max_depth=512, max_nodes=100000, max_tokens_per_place=4096)


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str
    toggles: dict[str, bool] = {}
    mitigations: list[str] = []
    bounds: dict[str, int] = {}


def _threat_entry(threat: ThreatDefinition, enabled: bool) -> dict[str, Any]:
    return {
        "id": threat.id,
        "enabled": enabled,
        "service": threat.service,
        "target_place": threat.target_place,
        "issue": threat.issue,
        "consequence": threat.consequence,
        "requires": list(threat.requires),
        "cia_impact": {axis: threat.cia_impact[axis] for axis in CIA_AXES},
    }


def create_app(
    scenario_dir: str = "scenarios",
    catalog_path: str | None = None,
    frontend_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="threatflow", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    scenarios: dict[str, Scenario] = {}
    skipped: list[dict[str, str]] = []
    for path in sorted(glob.glob(os.path.join(scenario_dir, "*.json"))):
        try:
            scenario = load_scenario(path)
        except Exception as exc:
            skipped.append({"file": path, "reason": str(exc)})
            continue
        scenarios[scenario.name] = scenario

    store_path = catalog_path or default_catalog_path()
    store = CatalogStore(store_path) if os.path.exists(store_path) else None

    runs: dict[str, dict[str, Any]] = {}
    run_ids = itertools.count(1)
    run_lock = threading.Lock()

    def _scenario_or_404(name: str) -> Scenario:
        scenario = scenarios.get(name)
        if scenario is None:
            raise HTTPException(status_code=404, detail=f"unknown scenario {name!r}")
        return scenario

    def _bounded(scenario: Scenario, requested: dict[str, int]) -> Scenario:
        merged = ExploreBounds.from_json({**scenario.bounds.to_json(), **requested})
        capped = ExploreBounds(
            max_depth=min(merged.max_depth, _BOUNDS_CAP.max_depth),
            max_nodes=min(merged.max_nodes, _BOUNDS_CAP.max_nodes),
            max_tokens_per_place=min(
                merged.max_tokens_per_place, _BOUNDS_CAP.max_tokens_per_place
            ),
        )
        return replace(scenario, bounds=capped)

    def _remember(body: dict[str, Any], dot: str) -> str:
        with run_lock:
            rid = f"run-{next(run_ids):04d}"
            runs[rid] = {"body": {"run_id": rid, **body}, "dot": dot}
        return rid

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError):
        return JSONResponse({"detail": "malformed request body"}, status_code=400)

    @app.exception_handler(InvalidScenario)
    async def _invalid(request: Request, exc: InvalidScenario):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.exception_handler(AnalysisError)
    async def _bad_bounds(request: Request, exc: AnalysisError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.exception_handler(UnknownToggle)
    async def _bad_toggle(request: Request, exc: UnknownToggle):
        return JSONResponse({"detail": str(exc)}, status_code=422)

    @app.exception_handler(UnknownMitigation)
    async def _bad_mitigation(request: Request, exc: UnknownMitigation):
        return JSONResponse({"detail": str(exc)}, status_code=422)

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {
            "status": "ok",
            "scenarios": sorted(scenarios),
            "skipped": skipped,
        }

    @app.get("/scenarios")
    def list_scenarios() -> dict[str, Any]:
        entries = []
        for name in sorted(scenarios):
            scenario = scenarios[name]
            catalog = scenario.catalog
            entries.append(
                {
                    "id": name,
                    "threats": [
                        _threat_entry(
                            catalog.threats[tid], scenario.enabled.get(tid, False)
                        )
                        for tid in sorted(catalog.threats)
                    ],
                    "mitigations": sorted(catalog.mitigations),
                    "active_mitigations": list(scenario.mitigations),
                    "requirements": [r.to_json() for r in scenario.requirements],
                    "bounds": scenario.bounds.to_json(),
                }
            )
        return {"scenarios": entries}

    @app.get("/threats")
    def list_threats() -> dict[str, Any]:
        if store is not None:
            return {
                "threats": [store.threats[tid].to_json() for tid in sorted(store.threats)],
                "drafts": [store.drafts[did].to_json() for did in sorted(store.drafts)],
                "links": sorted(store.links),
                "mitigations": sorted(store.mitigations),
            }
        threats: dict[str, ThreatDefinition] = {}
        links: set[str] = set()
        mitigations: set[str] = set()
        for scenario in scenarios.values():
            threats.update(scenario.catalog.threats)
            links.update(scenario.catalog.links)
            mitigations.update(scenario.catalog.mitigations)
        return {
            "threats": [threats[tid].to_json() for tid in sorted(threats)],
            "drafts": [],
            "links": sorted(links),
            "mitigations": sorted(mitigations),
        }

    @app.post("/analyze")
    def analyze(req: AnalyzeRequest) -> dict[str, Any]:
        scenario = _scenario_or_404(req.scenario)
        bounded = _bounded(scenario, req.bounds)
        result = run_scenario(bounded, toggles=req.toggles, mitigations=req.mitigations)
        dot = to_dot(result.graph, scenario.catalog.threats)
        rid = _remember(result.to_json(), dot)
        return runs[rid]["body"]

    @app.post("/speculate")
    def run_speculation(req: AnalyzeRequest) -> dict[str, Any]:
        scenario = _scenario_or_404(req.scenario)
        bounded = _bounded(scenario, req.bounds)
        outcome = speculate(bounded, toggles=req.toggles, mitigations=req.mitigations)
        dot = to_dot(outcome.variant.graph, scenario.catalog.threats)
        rid = _remember(outcome.to_json(), dot)
        return runs[rid]["body"]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict[str, Any]:
        run = runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return run["body"]

    @app.get("/runs/{run_id}/graph.dot")
    def get_run_dot(run_id: str) -> PlainTextResponse:
        run = runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return PlainTextResponse(run["dot"], media_type="text/vnd.graphviz")

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
