"""HTTP JSON API over the annotation store, plus the static annotation UI.

Mutations are serialized behind one lock (single logical writer); reads
are cheap and lock-free.  All state lives in the event-sourced store, so
restarting the service loses nothing.
"""

from __future__ import annotations

import json
import threading
from decimal import Decimal
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .backends import Usage
from .costs import CostParams, PromptMetrics, cost_per_tp, money_str
from .errors import NotFoundError, YieldError
from .store import AnnotationStore, SOURCES


class LabelRequest(BaseModel):
    candidate_id: str
    label: bool
    annotator: str = "anonymous"


def create_app(
    store: AnnotationStore,
    c_hr: Decimal = Decimal("0.2"),
    c_api_in: Decimal = Decimal("0.000001"),
    c_api_out: Decimal = Decimal("0.000002"),
    usage: Usage | None = None,
    static_dir: str | Path | None = None,
    api_token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="cxmine annotation service")
    write_lock = threading.Lock()

    def check_token(request: Request) -> None:
        if api_token and request.headers.get("X-Auth-Token") != api_token:
            raise HTTPException(status_code=401, detail="missing or bad token")

    @app.get("/api/next")
    def api_next(
        exclude: str = Query(default=""), _: None = Depends(check_token)
    ) -> dict:
        excluded = {e for e in exclude.split(",") if e}
        cand = store.sample_next(exclude=excluded)
        if cand is None:
            return {"exhausted": True, "progress": store.progress()}
        state = store.verb_states.get(cand.verb)
        return {
            "exhausted": False,
            "candidate_id": cand.candidate_id,
            "sentence_id": cand.sentence_id,
            "text": cand.text,
            "verb": cand.verb,
            "dobj": cand.dobj,
            "prep": cand.prep,
            "pobj": cand.pobj,
            "spans": cand.char_spans,
            "quota": {
                "verb": cand.verb,
                "positive": state.positive if state else 0,
                "negative": state.negative if state else 0,
                "cap": store.per_class_cap,
            },
        }

    @app.post("/api/label")
    def api_label(req: LabelRequest, _: None = Depends(check_token)) -> dict:
        with write_lock:
            try:
                record = store.submit_label(
                    req.candidate_id, req.label, annotator=req.annotator
                )
            except NotFoundError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from None
        return {"record": record.to_dict()}

    @app.get("/api/progress")
    def api_progress(_: None = Depends(check_token)) -> dict:
        return store.progress()

    @app.get("/api/cost")
    def api_cost(_: None = Depends(check_token)) -> dict:
        prog = store.progress()
        labeled, positives = prog["labeled"], prog["positives"]
        body = {
            "labeled": labeled,
            "positives": positives,
            "c_hr": str(c_hr),
            "precision": None,
            "projected_cost_per_tp": None,
        }
        if labeled and positives:
            # Live Eq. 1 view: every reviewed sentence costs c_hr; token
            # spend, when tracked, rides along through `usage`.
            m = PromptMetrics(
                prompt_id=0,
                tp=positives,
                fp=labeled - positives,
                fn=0,
                tn=0,
                input_tokens=usage.input_tokens if usage else 0,
                output_tokens=usage.output_tokens if usage else 0,
                devset_size=labeled,
                devset_positives=positives,
            )
            params = CostParams(c_hr=c_hr, c_api_in=c_api_in, c_api_out=c_api_out)
            try:
                body["projected_cost_per_tp"] = money_str(cost_per_tp(m, params))
            except YieldError:
                pass
            body["precision"] = money_str(m.precision, 4)
        return body

    @app.get("/api/conflicts")
    def api_conflicts(_: None = Depends(check_token)) -> dict:
        return {
            "conflicts": [
                {
                    "quad": list(c.quad),
                    "positive_ids": list(c.positive_ids),
                    "negative_ids": list(c.negative_ids),
                }
                for c in store.conflicts()
            ]
        }

    @app.get("/api/export")
    def api_export(
        labels: str = Query(default=""),
        sources: str = Query(default=""),
        filter: str = Query(default=""),
        _: None = Depends(check_token),
    ) -> PlainTextResponse:
        # Compact form: ?filter=labels=true;sources=human,extrapolated
        if filter:
            for segment in filter.split(";"):
                key, _sep, value = segment.partition("=")
                if key.strip() == "labels":
                    labels = value
                elif key.strip() == "sources":
                    sources = value
                else:
                    raise HTTPException(
                        status_code=422, detail=f"unknown filter key {key.strip()!r}"
                    )
        label_filter = None
        if labels:
            label_filter = {v.strip().lower() == "true" for v in labels.split(",")}
        source_filter = None
        if sources:
            wanted = {s.strip() for s in sources.split(",") if s.strip()}
            unknown = wanted - set(SOURCES)
            if unknown:
                raise HTTPException(
                    status_code=422, detail=f"unknown sources: {sorted(unknown)}"
                )
            source_filter = wanted
        lines, counts = store.export(labels=label_filter, sources=source_filter)
        body = "".join(json.dumps(line, ensure_ascii=False) + "\n" for line in lines)
        headers = {"X-Export-Counts": json.dumps(counts)}
        return PlainTextResponse(
            body, media_type="application/x-ndjson", headers=headers
        )

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
