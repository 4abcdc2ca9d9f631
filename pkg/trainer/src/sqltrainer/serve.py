"""Chat-completions endpoint over a saved checkpoint.

The app speaks the same request and response shape as the OpenAI chat API,
which is what the rotesql `infer` client expects: POST /v1/chat/completions
with a messages list, answer in choices[0].message.content. Generation is
greedy at temperature 0 and sampled otherwise, and only the new tokens are
decoded into the reply.
"""

from __future__ import annotations

import time

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from sqltrainer.data import PROMPT_SEPARATOR, load_tokenizer


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str = "sqltrainer"
    messages: list[ChatMessage] = Field(min_length=1)
    max_tokens: int | None = None
    temperature: float = 0.0


def build_app(model_dir: str, max_new_tokens: int = 64) -> FastAPI:
    from transformers import AutoModelForCausalLM

    from sqltrainer.errors import TrainerError

    tokenizer = load_tokenizer(model_dir)
    try:
        model = AutoModelForCausalLM.from_pretrained(model_dir)
    except OSError as exc:
        raise TrainerError(f"cannot load model from {model_dir}: {exc}")
    model.eval()

    app = FastAPI(title="sqltrainer")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model_dir": model_dir}

    @app.post("/v1/chat/completions")
    def chat(request: ChatRequest) -> dict:
        user_turns = [m.content for m in request.messages if m.role == "user"]
        if not user_turns:
            raise HTTPException(status_code=400, detail="no user message")
        prompt = user_turns[-1] + PROMPT_SEPARATOR
        encoding = tokenizer(prompt, return_tensors="pt")
        generate_kwargs = {
            "max_new_tokens": request.max_tokens or max_new_tokens,
            "do_sample": request.temperature > 0,
            "pad_token_id": tokenizer.pad_token_id,
            "eos_token_id": tokenizer.eos_token_id,
        }
        if request.temperature > 0:
            generate_kwargs["temperature"] = request.temperature
        with torch.no_grad():
            generated = model.generate(
                encoding.input_ids,
                attention_mask=encoding.attention_mask,
                **generate_kwargs,
            )
        reply = tokenizer.decode(
            generated[0][encoding.input_ids.shape[1]:], skip_special_tokens=True
        )
        return {
            "id": f"chatcmpl-{int(time.time() * 1000)}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": request.model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": reply.strip()},
                    "finish_reason": "stop",
                }
            ],
        }

    return app
