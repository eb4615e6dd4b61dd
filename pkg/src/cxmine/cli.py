"""Command-line pipeline driver.

Every stage reads and writes JSON-lines interchange files so any step can
be re-run, inspected, or swapped with hand-edited data.  Exit codes:
0 success, 1 validation error, 2 backend failure.
"""

from __future__ import annotations

import json
import sys
from decimal import Decimal
from pathlib import Path

import click

from . import backends, conllu, costs, gateway, patterns, probe, store as store_mod
from .config import Config, load_config
from .errors import BackendError, CxmineError

EXIT_VALIDATION = 1
EXIT_BACKEND = 2


def _fail(message: str, code: int = EXIT_VALIDATION):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_pattern(name_or_path: str) -> patterns.Pattern:
    if name_or_path == "cmc":
        return patterns.compile(patterns.cmc_pattern())
    path = Path(name_or_path)
    if not path.exists():
        _fail(f"pattern file not found: {path}")
    return patterns.compile(patterns.parse_pattern_file(path.read_text("utf-8")))


def _make_backend(spec: str, cfg: Config, model_id: str | None = None):
    if spec.startswith("mock:"):
        kind = spec.split(":", 1)[1]
        if kind == "motion-list":
            return probe.motion_list_backend()
        if kind == "echo-true":
            return _echo_backend(True)
        if kind == "echo-false":
            return _echo_backend(False)
        _fail(f"unknown mock backend {kind!r}; use motion-list, echo-true, echo-false")
    if spec.startswith("replay:"):
        path = spec.split(":", 1)[1]
        if not Path(path).exists():
            _fail(f"transcript file not found: {path}")
        return backends.ReplayBackend.from_file(path)
    if spec == "http":
        return backends.HttpChatBackend(
            endpoint=cfg.backend.endpoint,
            model_id=model_id or cfg.backend.model_id,
            api_key_env=cfg.backend.api_key_env,
            max_retries=cfg.backend.max_retries,
            requests_per_second=cfg.backend.requests_per_second,
        )
    _fail(f"unknown backend {spec!r}; use http, mock:<name> or replay:<file>")


def _echo_backend(label: bool):
    """Labels every batch item with a fixed value; shaped like a real reply."""

    def reply(system, user):
        ids = []
        for line in user.splitlines():
            line = line.strip()
            if not line.startswith("{"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                continue
            if "label" not in obj and "id" in obj:
                ids.append(str(obj["id"]))
        rows = "\n".join(
            json.dumps({"id": i, "label": label}) for i in ids
        )
        return f"```jsonl\n{rows}\n```"

    return backends.ScriptedBackend(reply, model_id=f"mock:echo-{str(label).lower()}")


@click.group(name="cxmine")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file.")
@click.pass_context
def cli(ctx, config_path):
    """Rare-construction mining pipeline."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_config(config_path) if config_path else Config()
    except CxmineError as exc:
        _fail(str(exc))


def main(argv=None):
    """Entry point with the documented exit codes (usage errors are 1, not
    click's default 2; 2 is reserved for backend failures)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_VALIDATION)
    except click.Abort:
        sys.exit(EXIT_VALIDATION)
    return 0


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--source", default="", help="Corpus label stored on each sentence.")
@click.option("--strict/--no-strict", default=False,
              help="Reject malformed sentences instead of skipping them.")
def ingest(input_path, out_path, source, strict):
    """Read CoNLL-U into the JSON-lines sentence store."""
    try:
        with open(input_path, encoding="utf-8") as f:
            sentences = conllu.parse_conllu(f, source=source, strict=strict)
    except CxmineError as exc:
        _fail(str(exc))
    with open(out_path, "w", encoding="utf-8") as out:
        n = conllu.write_sentences(sentences, out)
    click.echo(f"ingested {n} sentences -> {out_path}")


@cli.command()
@click.option("--pattern", "pattern_name", default="cmc", show_default=True)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="CoNLL-U file or JSON-lines sentence store.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--strict/--no-strict", default=False)
@click.pass_context
def match(ctx, pattern_name, input_path, out_path, strict):
    """Run a dependency pattern over a corpus, emitting candidates."""
    pat = _load_pattern(pattern_name)
    path = Path(input_path)
    try:
        with open(path, encoding="utf-8") as f:
            first = f.read(1)
            f.seek(0)
            if first == "{":
                sentences = conllu.read_sentences(f)
            else:
                sentences = conllu.parse_conllu(f, source=path.name, strict=strict)
    except CxmineError as exc:
        _fail(str(exc))
    n = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for s in sentences:
            for inst in patterns.find_matches(pat, s):
                out.write(
                    json.dumps(patterns.candidate_record(s, inst), ensure_ascii=False)
                    + "\n"
                )
                n += 1
    click.echo(f"{n} candidates -> {out_path}")


@cli.command()
@click.option("--prompt", "prompt_id", type=int, default=12, show_default=True)
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--backend", "backend_spec", default="http", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--usage-out", type=click.Path(), default=None)
@click.pass_context
def classify(ctx, prompt_id, candidates_path, backend_spec, out_path, usage_out):
    """Label candidates with a preset prompt through a backend."""
    cfg = ctx.obj["config"]
    presets = gateway.load_prompt_presets()
    if prompt_id not in presets:
        _fail(f"unknown prompt id {prompt_id}; presets are 1..18")
    spec = presets[prompt_id]
    shots = gateway.load_fewshots()
    with open(candidates_path, encoding="utf-8") as f:
        cands = [json.loads(line) for line in f if line.strip()]
    for c in cands:
        c["id"] = c["candidate_id"]
    backend = _make_backend(backend_spec, cfg, model_id=spec.model_id)
    try:
        outcome = gateway.classify(
            backend, spec, shots, cands,
            max_workers=cfg.backend.max_concurrency,
        )
    except BackendError as exc:
        _fail(str(exc), code=EXIT_BACKEND)
    with open(out_path, "w", encoding="utf-8") as out:
        for r in outcome.results:
            out.write(json.dumps({
                "candidate_id": r.candidate_id,
                "label": r.label,
                "explanation": r.explanation,
                "model_id": spec.model_id,
                "prompt_id": spec.id,
            }, ensure_ascii=False) + "\n")
    usage_dict = {
        "input_tokens": outcome.usage.input_tokens,
        "output_tokens": outcome.usage.output_tokens,
        "calls": outcome.usage.calls,
        "estimated": outcome.usage.estimated,
    }
    if usage_out:
        Path(usage_out).write_text(json.dumps(usage_dict, indent=2) + "\n")
    click.echo(
        f"{len(outcome.results)} labeled, {len(outcome.unresolved)} unresolved, "
        f"usage {usage_dict}"
    )
    if outcome.unresolved:
        for cid, reason in sorted(outcome.unresolved.items()):
            click.echo(f"unresolved {cid}: {reason}", err=True)
        sys.exit(EXIT_BACKEND)


@cli.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--predicted", "predicted_path", required=True, type=click.Path(exists=True))
@click.option("--usage", "usage_path", type=click.Path(exists=True), default=None)
@click.option("--prompt-id", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def metrics(gold_path, predicted_path, usage_path, prompt_id, out_path):
    """Score predictions against a gold dev set."""
    with open(gold_path, encoding="utf-8") as f:
        gold = costs.DevSet.from_jsonl(f)
    predicted = []
    inferred_prompt = 0
    with open(predicted_path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            inferred_prompt = d.get("prompt_id", inferred_prompt)
            predicted.append(gateway.LabeledResult(
                candidate_id=str(d["candidate_id"]),
                label=bool(d["label"]),
                explanation=d.get("explanation"),
            ))
    usage = backends.Usage()
    if usage_path:
        u = json.loads(Path(usage_path).read_text())
        usage = backends.Usage(
            input_tokens=u.get("input_tokens", 0),
            output_tokens=u.get("output_tokens", 0),
            calls=u.get("calls", 0),
            estimated=u.get("estimated", False),
        )
    try:
        m = costs.devset_metrics(
            gold, predicted, usage, prompt_id=prompt_id or inferred_prompt
        )
    except CxmineError as exc:
        _fail(str(exc))
    with open(out_path, "w", encoding="utf-8") as out:
        out.write(json.dumps(m.to_dict()) + "\n")
    click.echo(
        f"prompt {m.prompt_id}: tp={m.tp} fp={m.fp} fn={m.fn} tn={m.tn} "
        f"precision={costs.money_str(m.precision, 4)} recall={costs.money_str(m.recall, 4)}"
    )


def _read_metrics(path: str) -> list[costs.PromptMetrics]:
    with open(path, encoding="utf-8") as f:
        return [costs.PromptMetrics.from_dict(json.loads(line)) for line in f if line.strip()]


@cli.command("select-prompt")
@click.option("--metrics", "metrics_path", required=True, type=click.Path(exists=True))
@click.option("--c-hr", default="0.2", show_default=True)
@click.option("--c-api-in", default=None)
@click.option("--c-api-out", default=None)
@click.option("--tp-req", type=int, default=1000, show_default=True)
@click.pass_context
def select_prompt_cmd(ctx, metrics_path, c_hr, c_api_in, c_api_out, tp_req):
    """Pick the cheapest prompt per true positive and print the comparison."""
    cfg = ctx.obj["config"]
    params = costs.CostParams(
        c_hr=Decimal(c_hr),
        c_api_in=Decimal(c_api_in) if c_api_in else cfg.c_api_in,
        c_api_out=Decimal(c_api_out) if c_api_out else cfg.c_api_out,
    )
    ms = _read_metrics(metrics_path)
    try:
        best = costs.select_prompt(ms, params)
    except CxmineError as exc:
        _fail(str(exc))
    click.echo(costs.comparison_table(ms, params, tp_required=tp_req))
    click.echo(f"selected prompt: {best} (c_hr={c_hr})")


@cli.command("size-corpus")
@click.option("--devset-size", type=int, required=True)
@click.option("--devset-tp", type=int, required=True)
@click.option("--tp-req", type=int, required=True)
def size_corpus(devset_size, devset_tp, tp_req):
    """Corpus size needed for a required true-positive yield."""
    try:
        n = costs.required_corpus_size(devset_size, devset_tp, tp_req)
    except CxmineError as exc:
        _fail(str(exc))
    click.echo(str(n))


@cli.command("cost-curve")
@click.option("--metrics", "metrics_path", required=True, type=click.Path(exists=True))
@click.option("--c-hr-min", default="0.001", show_default=True)
@click.option("--c-hr-max", default="2", show_default=True)
@click.option("--points", type=int, default=101, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def cost_curve_cmd(ctx, metrics_path, c_hr_min, c_hr_max, points, out_path):
    """Export per-prompt cost curves as CSV; print crossovers and envelope."""
    cfg = ctx.obj["config"]
    ms = _read_metrics(metrics_path)
    try:
        curve_set = costs.cost_curve(
            ms, (Decimal(c_hr_min), Decimal(c_hr_max)), (cfg.c_api_in, cfg.c_api_out)
        )
    except CxmineError as exc:
        _fail(str(exc))
    Path(out_path).write_text(costs.curve_csv(curve_set, points=points))
    for c in curve_set.crossovers:
        click.echo(
            f"crossover: prompts {c.prompt_a}/{c.prompt_b} at c_hr={costs.money_str(c.c_hr)}"
        )
    for seg in curve_set.envelope:
        click.echo(
            f"optimal prompt {seg.prompt_id} on "
            f"[{costs.money_str(seg.start)}, {costs.money_str(seg.end)}]"
        )
    click.echo(f"curves -> {out_path}")


def _open_store(ctx, candidates_path, events_path) -> store_mod.AnnotationStore:
    cfg = ctx.obj["config"]
    with open(candidates_path, encoding="utf-8") as f:
        cands = store_mod.read_candidates(f)
    return store_mod.AnnotationStore(
        cands, event_log=events_path, per_class_cap=cfg.per_class_cap
    )


@cli.command()
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", required=True, type=click.Path())
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Directory with the built annotation UI.")
@click.pass_context
def serve(ctx, candidates_path, events_path, port, host, static_dir):
    """Serve the annotation queue and UI over HTTP."""
    import uvicorn

    from .service import create_app

    cfg = ctx.obj["config"]
    store = _open_store(ctx, candidates_path, events_path)
    app = create_app(
        store,
        c_hr=cfg.c_hr,
        c_api_in=cfg.c_api_in,
        c_api_out=cfg.c_api_out,
        static_dir=static_dir or cfg.service.static_dir,
        api_token=cfg.service.api_token,
    )
    uvicorn.run(
        app, host=host or cfg.service.host, port=port or cfg.service.port,
        log_level="info",
    )


@cli.command()
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", required=True, type=click.Path())
@click.pass_context
def extrapolate(ctx, candidates_path, events_path):
    """Propagate human labels across identical 4-tuples."""
    store = _open_store(ctx, candidates_path, events_path)
    records, conflicts = store.extrapolate()
    click.echo(f"extrapolated {len(records)} labels")
    for c in conflicts:
        click.echo(
            f"conflict: {'/'.join(c.quad)} "
            f"(+{len(c.positive_ids)} / -{len(c.negative_ids)})"
        )


@cli.command()
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", required=True, type=click.Path())
@click.option("--labels", default="", help="Comma list: true,false")
@click.option("--sources", default="", help="Comma list: human,llm,extrapolated")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def export(ctx, candidates_path, events_path, labels, sources, out_path):
    """Write the filtered dataset as JSON-lines."""
    store = _open_store(ctx, candidates_path, events_path)
    label_filter = None
    if labels:
        label_filter = {v.strip().lower() == "true" for v in labels.split(",")}
    source_filter = None
    if sources:
        source_filter = {s.strip() for s in sources.split(",") if s.strip()}
        bad = source_filter - set(store_mod.SOURCES)
        if bad:
            _fail(f"unknown sources: {sorted(bad)}")
    lines, counts = store.export(labels=label_filter, sources=source_filter)
    with open(out_path, "w", encoding="utf-8") as out:
        store_mod.write_jsonl(lines, out)
    click.echo(f"{len(lines)} lines -> {out_path}")
    for key in sorted(counts):
        click.echo(f"  {key}: {counts[key]}")


@cli.command("probe")
@click.option("--backend", "backend_spec", default="http", show_default=True)
@click.option("--instances", "instances_path", required=True, type=click.Path(exists=True),
              help="Candidate JSON-lines of confirmed positives.")
@click.option("--sentences", "sentences_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--transcripts", "transcripts_path", type=click.Path(), default=None)
@click.pass_context
def probe_cmd(ctx, backend_spec, instances_path, sentences_path, out_path, transcripts_path):
    """Run the verb-substitution probe over confirmed instances."""
    cfg = ctx.obj["config"]
    backend = _make_backend(backend_spec, cfg)
    with open(sentences_path, encoding="utf-8") as f:
        sentences = {s.id: s for s in conllu.read_sentences(f)}
    instances = []
    with open(instances_path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            cand = store_mod.Candidate.from_dict(json.loads(line))
            if cand.sentence_id not in sentences:
                _fail(f"sentence {cand.sentence_id!r} not in {sentences_path}")
            instances.append(
                probe.ProbeInstance.from_candidate(cand, sentences[cand.sentence_id])
            )
    sink = open(transcripts_path, "w", encoding="utf-8") if transcripts_path else None
    try:
        report = probe.run_probe(backend, instances, transcript_sink=sink)
    finally:
        if sink:
            sink.close()
    if out_path:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    click.echo(probe.report_table([report]))
    pct = report.percentages()
    click.echo(
        f"resolved {report.resolved}, unresolved {report.unresolved}; "
        f"YY {pct['YY']}% NY {pct['NY']}% XN {pct['XN']}%"
    )


if __name__ == "__main__":
    main()
