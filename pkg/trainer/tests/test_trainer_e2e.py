"""Trainer acceptance: loss reduction and a served checkpoint behind infer.

Each check records a verdict line that the terminal summary prints with
the core suite's criteria, so one pytest run shows the whole contract.
"""

from __future__ import annotations

import contextlib
import json
import threading
import time
from pathlib import Path

import pytest

RESULTS: list[tuple[str, str]] = []


@contextlib.contextmanager
def criterion(label: str):
    try:
        yield
    except BaseException:
        RESULTS.append((label, "FAIL"))
        raise
    RESULTS.append((label, "PASS"))


@pytest.fixture(scope="module")
def endpoint(trained_dir):
    """The trained checkpoint served over HTTP on an ephemeral port."""
    import uvicorn

    from sqltrainer.serve import build_app

    app = build_app(trained_dir, max_new_tokens=16)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 60
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start within 60s")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}/v1/chat/completions"
    server.should_exit = True
    thread.join(timeout=10)


def wait_for_health(port_url: str) -> None:
    import httpx

    base = port_url.rsplit("/v1/", 1)[0]
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            if httpx.get(f"{base}/health", timeout=2.0).status_code == 200:
                return
        except httpx.HTTPError:
            time.sleep(0.1)
    raise RuntimeError("health endpoint never answered")


def test_criterion_9_ten_steps_reduce_loss(trained_dir):
    with criterion("criterion 9a: 10 training steps reduce loss"):
        manifest = json.loads(
            (Path(trained_dir) / "train_manifest.json").read_text()
        )
        assert manifest["spec"]["steps"] == 10
        assert len(manifest["losses"]) == 10
        assert manifest["last_loss"] < manifest["first_loss"]
        assert manifest["total_params"] < 100_000_000


def test_criterion_9_served_checkpoint_answers_through_infer(
    endpoint, dataset_rows, tmp_path
):
    with criterion("criterion 9b: served checkpoint answers via infer"):
        from rotesql import cli as rotesql_cli

        wait_for_health(endpoint)
        routes_path = tmp_path / "routes.json"
        routes_path.write_text(json.dumps({"fleet": endpoint}))
        questions = []
        for i, row in enumerate(dataset_rows[:3]):
            _, question_line, _ = row["prompt"].split("\n")
            questions.append(
                {
                    "example_id": f"q{i}",
                    "db_id": row["db_id"],
                    "question": question_line.removeprefix("question: "),
                }
            )
        questions_path = tmp_path / "questions.jsonl"
        with open(questions_path, "w", encoding="utf-8") as fh:
            for q in questions:
                fh.write(json.dumps(q) + "\n")
        out_path = tmp_path / "predictions.jsonl"
        log_path = tmp_path / "requests.jsonl"

        with pytest.raises(SystemExit) as info:
            rotesql_cli.main(
                [
                    "infer",
                    "--questions", str(questions_path),
                    "--routes", str(routes_path),
                    "--out", str(out_path),
                    "--log-requests", str(log_path),
                ]
            )
        assert info.value.code == 0

        predictions = [
            json.loads(line) for line in out_path.read_text().splitlines()
        ]
        assert len(predictions) == 3
        for q, pred in zip(questions, predictions):
            assert pred["example_id"] == q["example_id"]
            assert pred["db_id"] == "fleet"
            assert isinstance(pred["predicted_sql"], str)
            assert pred["predicted_sql"]

        sent = [
            json.loads(line) for line in log_path.read_text().splitlines()
        ]
        for entry in sent:
            assert entry["endpoint"] == endpoint
            prompt = entry["payload"]["messages"][0]["content"]
            assert prompt.startswith("database: fleet\nquestion: ")
            assert prompt.endswith("SQL:")
            assert "create table" not in prompt.lower()


def test_served_replies_look_like_sql(endpoint):
    """The smoke-trained model should at least open with a select token."""
    import httpx

    payload = {
        "messages": [
            {
                "role": "user",
                "content": "database: fleet\nquestion: how many ship rows "
                           "have name above 0\nSQL:",
            }
        ],
        "temperature": 0.0,
    }
    body = httpx.post(endpoint, json=payload, timeout=30.0).json()
    content = body["choices"][0]["message"]["content"]
    assert content.split()[:1] == ["select"]
