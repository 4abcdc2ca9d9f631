"""Command-line surface: the pipeline as subcommands over local files.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 provider
error. Every output-producing subcommand writes a manifest next to its
artifacts; manifests contain seeds and content hashes but no timestamps, so
a rerun with the same inputs is byte-identical.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from rotesql import catalog as catalog_mod
from rotesql import dataset as dataset_mod
from rotesql import evalkit, genclient, promptkit, retriever
from rotesql.config import WorkspaceConfig, load_config, pick
from rotesql.errors import ConfigError, ProviderError, RotesqlError
from rotesql.routing import ExpertRoute, load_routes, route
from rotesql.sqlkit import lexer
from rotesql.sqlkit.skeleton import SqlSkeleton, dedup_skeletons, extract_skeleton
from rotesql.tokens import load_counter


def _fail_payload(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Workspace config JSON (databases, provider, seeds).")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None) -> None:
    """Per-database text-to-SQL data synthesis, costing, and evaluation."""
    ctx.obj = load_config(config_path)


def _db_path(workspace: WorkspaceConfig, db_id: str, db_flag: str | None) -> str:
    if db_flag:
        if not Path(db_flag).exists():
            raise ConfigError(f"database file missing: {db_flag}")
        return db_flag
    return workspace.database_path(db_id)


def _read_questions(path: str) -> list[dict]:
    """Question files: JSONL with question/db_id fields, or bare text lines."""
    out: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RotesqlError(f"{path}:{lineno}: bad question line: {exc}")
                question = record.get("question") or record.get("nlq")
                if not question:
                    raise RotesqlError(f"{path}:{lineno}: missing question field")
                out.append(
                    {
                        "question": question,
                        "db_id": record.get("db_id"),
                        "example_id": str(record.get("example_id", lineno)),
                        "gold_sql": record.get("gold_sql") or record.get("sql"),
                    }
                )
            else:
                out.append(
                    {"question": line, "db_id": None,
                     "example_id": str(lineno), "gold_sql": None}
                )
    return out


def _read_sql_corpus(path: str) -> list[str]:
    """Seed SQL: JSONL records with sql/query fields, or plain statements."""
    raw: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RotesqlError(f"{path}:{lineno}: bad corpus line: {exc}")
                sql = record.get("sql") or record.get("query")
                if not sql:
                    raise RotesqlError(f"{path}:{lineno}: missing sql field")
                raw.append(sql)
            else:
                raw.append(line)
    out: list[str] = []
    for sql in raw:
        out.extend(_split_statements(sql))
    return out


def _split_statements(sql: str) -> list[str]:
    try:
        toks = lexer.tokenize(sql)
    except RotesqlError:
        return [sql]
    cuts = [t.pos for t in toks if t.kind == lexer.PUNCT and t.text == ";"]
    if not cuts:
        return [sql]
    pieces = []
    start = 0
    for cut in cuts:
        piece = sql[start:cut].strip()
        if piece:
            pieces.append(piece)
        start = cut + 1
    tail = sql[start:].strip()
    if tail:
        pieces.append(tail)
    if len(pieces) > 1:
        click.echo(
            f"warning: using first statement of a {len(pieces)}-statement input",
            err=True,
        )
    return pieces[:1]


def _run_dir(out_dir: str, run_id: str | None) -> Path:
    stamp = run_id or time.strftime("%Y%m%d-%H%M%S")
    path = Path(out_dir) / stamp
    path.mkdir(parents=True, exist_ok=True)
    return path


@cli.command()
@click.option("--db-id", required=True)
@click.option("--db", "db_flag", type=click.Path(), default=None,
              help="Database file (defaults to the config registry).")
@click.option("--sample-cap", default=catalog_mod.DEFAULT_SAMPLE_CAP,
              show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Catalog file to write [default: <db-id>.catalog.jsonl].")
@click.pass_obj
def profile(workspace: WorkspaceConfig, db_id: str, db_flag: str | None,
            sample_cap: int, out_path: str | None) -> None:
    """Introspect a database into a catalog file."""
    path = _db_path(workspace, db_id, db_flag)
    cat = catalog_mod.profile_database(path, db_id, sample_cap=sample_cap)
    out_path = out_path or f"{db_id}.catalog.jsonl"
    catalog_mod.save_catalog(cat, out_path)
    click.echo(
        f"profiled {db_id}: {len(cat.tables)} tables,"
        f" {catalog_mod.column_count(cat)} columns,"
        f" {len(cat.foreign_keys)} foreign keys -> {out_path}"
    )


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Seed SQL corpus (JSONL with sql field, or plain lines).")
@click.option("--out", "out_path", required=True, type=click.Path())
def skeletons(input_path: str, out_path: str) -> None:
    """Extract deduplicated SQL skeletons from a seed corpus."""
    extracted: list[SqlSkeleton] = []
    failures = 0
    for sql in _read_sql_corpus(input_path):
        try:
            extracted.append(extract_skeleton(sql))
        except RotesqlError as exc:
            failures += 1
            click.echo(f"warning: skipping seed SQL: {exc}", err=True)
    unique = dedup_skeletons(extracted)
    with open(out_path, "w", encoding="utf-8") as fh:
        for sk in unique:
            fh.write(json.dumps(
                {
                    "template": sk.template,
                    "required_tables": sk.required_tables,
                    "source_count": sk.source_count,
                },
                sort_keys=True,
            ) + "\n")
    click.echo(
        f"{len(extracted)} seeds -> {len(unique)} skeletons"
        f" ({failures} unparseable) -> {out_path}"
    )


def load_skeletons(path: str) -> list[SqlSkeleton]:
    out: list[SqlSkeleton] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                out.append(
                    SqlSkeleton(
                        template=record["template"],
                        required_tables=record["required_tables"],
                        source_count=record.get("source_count", 1),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise RotesqlError(f"{path}:{lineno}: bad skeleton line: {exc}")
    return out


@cli.command()
@click.option("--db-id", required=True)
@click.option("--db", "db_flag", type=click.Path(), default=None)
@click.option("--skeletons", "skeletons_path", required=True,
              type=click.Path(exists=True))
@click.option("--budget", required=True, type=int)
@click.option("--seed", type=int, default=None,
              help="Mock determinism seed [default: seeds.synthesis].")
@click.option("--provider", "provider_kind", default=None,
              type=click.Choice(["mock", "http"]))
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--mock-invalid-every", type=int, default=None)
@click.option("--out-dir", default=None,
              help="Run artifacts directory [default: config output_dir].")
@click.option("--run-id", default=None,
              help="Fixed run directory name (for reproducible paths).")
@click.pass_obj
def synth(workspace: WorkspaceConfig, db_id: str, db_flag: str | None,
          skeletons_path: str, budget: int, seed: int | None,
          provider_kind: str | None, endpoint: str | None, model: str | None,
          mock_invalid_every: int | None, out_dir: str | None,
          run_id: str | None) -> None:
    """Generate execution-validated NLQ-SQL pairs for one database."""
    path = _db_path(workspace, db_id, db_flag)
    cat = catalog_mod.profile_database(path, db_id)
    sks = load_skeletons(skeletons_path)
    config = workspace.provider
    config.provider = pick(provider_kind, "provider", None, config.provider)
    config.endpoint = pick(endpoint, "endpoint", None, config.endpoint)
    config.model = pick(model, "model", None, config.model)
    config.seed = seed if seed is not None else workspace.seed("synthesis")
    if mock_invalid_every is not None:
        config.mock_invalid_every = mock_invalid_every
    result = genclient.run_synthesis(cat, sks, budget, config, db_path=path)
    run_path = _run_dir(pick(out_dir, "output_dir", workspace.output_dir, "runs"),
                        run_id)
    pairs_path = run_path / "pairs.jsonl"
    genclient.write_pairs(result.pairs, str(pairs_path))
    manifest_path = run_path / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(
        f"synthesized {len(result.pairs)}/{budget} pairs -> {pairs_path}"
    )
    if result.manifest["shortfall"]:
        click.echo(
            f"warning: shortfall of {result.manifest['shortfall']} pairs",
            err=True,
        )


@cli.command()
@click.option("--catalog", "catalog_path", required=True,
              type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True))
@click.option("--format", "fmt", default="all",
              type=click.Choice(["all", "id_only", "schema_only", "full_schema"]))
@click.option("--tokenizer", "tokenizer_flag", type=click.Path(), default=None)
@click.option("--db", "db_flag", type=click.Path(), default=None,
              help="Database file for retrieved values in full_schema prompts.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def prompts(workspace: WorkspaceConfig, catalog_path: str, questions_path: str,
            fmt: str, tokenizer_flag: str | None, db_flag: str | None,
            out_path: str) -> None:
    """Render prompt sets in the competing formats, with token counts."""
    cat = catalog_mod.load_catalog(catalog_path)
    questions = _read_questions(questions_path)
    tokenizer_file = pick(tokenizer_flag, "tokenizer", workspace.tokenizer_file, None)
    counter = load_counter(tokenizer_file)
    index = None
    if db_flag:
        index = retriever.build_value_index(db_flag, db_id=cat.db_id)
    formats = (
        ["id_only", "schema_only", "full_schema"] if fmt == "all" else [fmt]
    )
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for q in questions:
            retrieved = []
            if index is not None:
                retrieved = [
                    (f"{m.table}.{m.column}", m.value)
                    for m in retriever.retrieve_values(q["question"], index)
                ]
            for name in formats:
                if name == "id_only":
                    record = promptkit.render_id_only(
                        cat.db_id, q["question"], counter
                    )
                elif name == "schema_only":
                    record = promptkit.render_schema_only(
                        cat, q["question"], counter
                    )
                else:
                    record = promptkit.render_full_schema(
                        cat, q["question"], retrieved=retrieved, counter=counter
                    )
                fh.write(json.dumps(
                    {
                        "format": record.format.value,
                        "db_id": record.db_id,
                        "question": record.question,
                        "text": record.text,
                        "token_count": record.token_count,
                        "counter": counter.label,
                    },
                    sort_keys=True,
                ) + "\n")
                written += 1
    click.echo(f"rendered {written} prompts -> {out_path}")


@cli.command()
@click.option("--db", "db_flag", required=True, type=click.Path(exists=True))
@click.option("--db-id", default="")
@click.option("--question", default=None)
@click.option("--questions", "questions_path", type=click.Path(exists=True),
              default=None)
@click.option("--top-k", default=retriever.DEFAULT_TOP_K, show_default=True)
@click.option("--threshold", default=retriever.DEFAULT_THRESHOLD,
              show_default=True)
@click.option("--index", "index_path", type=click.Path(), default=None,
              help="Index cache file; rebuilt when the database hash changes.")
def retrieve(db_flag: str, db_id: str, question: str | None,
             questions_path: str | None, top_k: int, threshold: float,
             index_path: str | None) -> None:
    """Match question spans against indexed cell values."""
    if (question is None) == (questions_path is None):
        raise click.UsageError("pass exactly one of --question/--questions")
    index = None
    if index_path and Path(index_path).exists():
        cached = retriever.load_index(index_path)
        if cached.content_hash == retriever.file_content_hash(db_flag):
            index = cached
    if index is None:
        index = retriever.build_value_index(db_flag, db_id=db_id)
        if index_path:
            retriever.save_index(index, index_path)
    queries = (
        [question]
        if question is not None
        else [q["question"] for q in _read_questions(questions_path)]
    )
    for q in queries:
        matches = retriever.retrieve_values(q, index, top_k=top_k,
                                            threshold=threshold)
        click.echo(json.dumps(
            {
                "question": q,
                "matches": [
                    {
                        "table": m.table,
                        "column": m.column,
                        "value": m.value,
                        "span": list(m.matched_span),
                        "score": round(m.score, 4),
                    }
                    for m in matches
                ],
            },
            sort_keys=True,
        ))


@cli.command()
@click.option("--synthetic", "synthetic_paths", multiple=True, required=True,
              type=click.Path(exists=True),
              help="Pairs file(s); several only for --ablate single_model.")
@click.option("--original", "original_path", type=click.Path(exists=True),
              default=None, help="Out-of-domain JSONL (db_id, question, sql).")
@click.option("--seed", type=int, default=None)
@click.option("--ablate", "ablate_name", default=None,
              type=click.Choice(list(dataset_mod.ABLATION_VARIANTS)))
@click.option("--subsample", type=int, default=None,
              help="Keep only N synthetic pairs (seeded, order-preserving).")
@click.option("--out-dir", default=None)
@click.option("--run-id", default=None)
@click.pass_obj
def mix(workspace: WorkspaceConfig, synthetic_paths: tuple[str, ...],
        original_path: str | None, seed: int | None, ablate_name: str | None,
        subsample: int | None, out_dir: str | None, run_id: str | None) -> None:
    """Assemble an expert training set (optionally an ablation variant)."""
    seed = seed if seed is not None else workspace.seed("mix", 7)
    original = []
    if original_path:
        for q in _read_questions(original_path):
            if not q["db_id"] or not q["gold_sql"]:
                raise RotesqlError(
                    f"{original_path}: original rows need db_id and sql fields"
                )
            original.append((q["db_id"], q["question"], q["gold_sql"]))
    if ablate_name != "single_model" and len(synthetic_paths) != 1:
        raise click.UsageError("multiple --synthetic only with single_model")
    mixes = []
    for p in synthetic_paths:
        pairs = genclient.read_pairs(p)
        if subsample is not None:
            pairs = dataset_mod.subsample_synthetic(pairs, subsample, seed)
        mixes.append(dataset_mod.mix(pairs, original, seed))
    if ablate_name is None:
        examples, manifest = mixes[0]
    else:
        flags = {name: name == ablate_name for name in dataset_mod.ABLATION_VARIANTS}
        examples, manifest = dataset_mod.ablate(
            dataset_mod.AblationConfig(**flags), mixes
        )
    run_path = _run_dir(pick(out_dir, "output_dir", workspace.output_dir, "runs"),
                        run_id)
    dataset_path = run_path / "dataset.jsonl"
    dataset_mod.emit_dataset(examples, str(dataset_path))
    manifest.dataset_path = str(dataset_path)
    dataset_mod.write_manifest(manifest, str(run_path / "expert.json"))
    click.echo(
        f"dataset {manifest.expert_id}: {manifest.counts} -> {dataset_path}"
    )


@cli.command()
@click.option("--preds", "preds_path", required=True, type=click.Path(exists=True))
@click.option("--db", "db_specs", multiple=True,
              help="db_id=path registration (else the config registry).")
@click.option("--timeout", default=evalkit.DEFAULT_EVAL_TIMEOUT, show_default=True)
@click.option("--set-semantics", is_flag=True, default=False,
              help="Compare result rows as sets instead of bags.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_obj
def evaluate(workspace: WorkspaceConfig, preds_path: str,
             db_specs: tuple[str, ...], timeout: float, set_semantics: bool,
             out_path: str | None) -> None:
    """Score a predictions file by execution accuracy."""
    preds = evalkit.load_predictions(preds_path)
    db_paths = dict(workspace.databases)
    for spec in db_specs:
        db_id, _, path = spec.partition("=")
        if not path:
            raise click.UsageError(f"--db expects db_id=path, got {spec!r}")
        db_paths[db_id] = path
    report = evalkit.execution_accuracy(
        preds, db_paths, timeout=timeout, set_semantics=set_semantics
    )
    click.echo(report.to_table())
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        click.echo(f"report -> {out_path}")


@cli.command()
@click.option("--synthetic", "synthetic_path", required=True,
              type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--matcher", default="structural",
              type=click.Choice(["structural", "string"]), show_default=True)
def overlap(synthetic_path: str, gold_path: str, matcher: str) -> None:
    """Percentage of gold SQLs structurally matched by synthetic SQLs."""
    pairs = genclient.read_pairs(synthetic_path)
    gold = _read_sql_corpus(gold_path)
    rate = evalkit.overlap_rate(pairs, gold, matcher=matcher)
    click.echo(json.dumps(
        {
            "matcher": matcher,
            "synthetic": len(pairs),
            "gold": len(gold),
            "overlap_percent": round(rate, 4),
        },
        sort_keys=True,
    ))


@cli.command()
@click.option("--prompts", "prompts_path", required=True,
              type=click.Path(exists=True),
              help="Prompt records as written by the prompts subcommand.")
@click.option("--params", default=float(promptkit.DEFAULT_PARAM_COUNT),
              show_default=True, help="Model parameter count for FLOPS.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def cost(prompts_path: str, params: float, out_path: str | None) -> None:
    """Token and FLOPS statistics per prompt format, with savings."""
    sets: dict[str, list[promptkit.PromptRecord]] = {}
    counter_label = "approximate"
    with open(prompts_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                prompt = promptkit.PromptRecord(
                    format=promptkit.PromptFormat(record["format"]),
                    text=record["text"],
                    token_count=record["token_count"],
                    db_id=record["db_id"],
                    question=record["question"],
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise RotesqlError(f"{prompts_path}:{lineno}: bad prompt: {exc}")
            counter_label = record.get("counter", counter_label)
            sets.setdefault(record["format"], []).append(prompt)
    sizes = {len(v) for v in sets.values()}
    if len(sizes) > 1:
        click.echo("warning: prompt sets differ in size", err=True)
    report = promptkit.cost_report(
        sets, param_count=int(params), counter_label=counter_label
    )
    click.echo(report.to_table())
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        click.echo(f"report -> {out_path}")


def run_infer(
    questions: list[dict],
    routes: ExpertRoute,
    model: str = "expert",
    temperature: float = 0.0,
    timeout: float = 60.0,
    strip_db_id: bool = False,
    transport=None,
) -> tuple[list[dict], list[dict]]:
    """Route each question to its expert and collect SQL completions.

    Returns (predictions, request_log); the log holds every outbound payload
    so callers can verify prompts carry no schema text.
    """
    import httpx

    predictions: list[dict] = []
    request_log: list[dict] = []
    with httpx.Client(timeout=timeout, transport=transport) as client:
        for q in questions:
            db_id = q.get("db_id")
            if not db_id:
                raise RotesqlError(f"question {q['example_id']} lacks db_id")
            endpoint = route(q["question"], db_id, routes)
            prompt = promptkit.render_id_only(db_id, q["question"]).text
            if strip_db_id:
                prompt = dataset_mod.strip_db_marker(prompt)
            payload = {
                "model": model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": temperature,
            }
            request_log.append({"endpoint": endpoint, "payload": payload})
            try:
                response = client.post(endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                text = body["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"expert call failed for {db_id}: {exc}")
            sql = genclient.extract_candidate(text) or text.strip()
            prediction = {
                "example_id": q["example_id"],
                "db_id": db_id,
                "question": q["question"],
                "predicted_sql": sql,
            }
            if q.get("gold_sql"):
                prediction["gold_sql"] = q["gold_sql"]
            predictions.append(prediction)
    return predictions, request_log


@cli.command()
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True),
              help="JSONL with db_id and question per line.")
@click.option("--routes", "routes_path", required=True,
              type=click.Path(exists=True),
              help="JSON map db_id -> expert endpoint ('*' for merged).")
@click.option("--model", default="expert", show_default=True)
@click.option("--no-db-id", "strip_db_id", is_flag=True, default=False,
              help="Render prompts without the database id line.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--log-requests", "log_path", type=click.Path(), default=None)
def infer(questions_path: str, routes_path: str, model: str,
          strip_db_id: bool, out_path: str, log_path: str | None) -> None:
    """Send questions to their routed experts; write predictions JSONL."""
    questions = _read_questions(questions_path)
    routes = load_routes(routes_path)
    predictions, request_log = run_infer(
        questions, routes, model=model, strip_db_id=strip_db_id
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p, sort_keys=True) + "\n")
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            for entry in request_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    click.echo(f"{len(predictions)} predictions -> {out_path}")


def main(argv: list[str] | None = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except ProviderError as exc:
        click.echo(_fail_payload("provider", str(exc)), err=True)
        sys.exit(3)
    except RotesqlError as exc:
        click.echo(_fail_payload(type(exc).__name__.lower(), str(exc)), err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
