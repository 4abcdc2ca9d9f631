"""Command line entry points for training and serving.

Exit codes: 0 on success, 1 for usage problems, 2 for data or spec
problems surfaced as TrainerError.
"""

from __future__ import annotations

import logging
import sys

import click

from sqltrainer.errors import TrainerError
from sqltrainer.spec import FAMILY_PRESETS, LORA_LEARNING_RATE, TrainSpec


@click.group()
def cli() -> None:
    """Fine-tune and serve small SQL generators."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")


@cli.command()
@click.option("--model", "model_path", required=True, help="Base model directory.")
@click.option("--dataset", "dataset_path", required=True, help="Training JSONL.")
@click.option("--output", "output_dir", required=True, help="Checkpoint directory.")
@click.option("--tokenizer-file", default=None, help="Standalone tokenizer.json.")
@click.option(
    "--family",
    type=click.Choice(sorted(FAMILY_PRESETS)),
    default=None,
    help="Apply a model-family preset for steps, batch size, and learning rate.",
)
@click.option("--steps", type=int, default=None, help="Override optimizer steps.")
@click.option("--batch-size", type=int, default=None, help="Override batch size.")
@click.option(
    "--learning-rate", type=float, default=None, help="Override learning rate."
)
@click.option("--max-tokens", type=int, default=None, help="Sequence length cap.")
@click.option("--lora/--full", "use_lora", default=False, help="Adapter training.")
@click.option("--lora-r", type=int, default=None, help="Adapter rank.")
@click.option("--lora-alpha", type=int, default=None, help="Adapter scaling alpha.")
@click.option("--seed", type=int, default=None, help="Shuffle and init seed.")
def train(
    model_path: str,
    dataset_path: str,
    output_dir: str,
    tokenizer_file: str | None,
    family: str | None,
    steps: int | None,
    batch_size: int | None,
    learning_rate: float | None,
    max_tokens: int | None,
    use_lora: bool,
    lora_r: int | None,
    lora_alpha: int | None,
    seed: int | None,
) -> None:
    """Run a fine-tuning job and write a merged checkpoint."""
    from sqltrainer.spec import for_family
    from sqltrainer.train import train as run_train

    overrides = {
        "steps": steps,
        "batch_size": batch_size,
        "learning_rate": learning_rate,
        "max_tokens": max_tokens,
        "lora_r": lora_r,
        "lora_alpha": lora_alpha,
        "seed": seed,
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if family is not None:
        spec = for_family(
            family,
            use_lora=use_lora,
            model_path=model_path,
            dataset_path=dataset_path,
            output_dir=output_dir,
            tokenizer_file=tokenizer_file,
            **overrides,
        )
    else:
        if use_lora and "learning_rate" not in overrides:
            overrides["learning_rate"] = LORA_LEARNING_RATE
        spec = TrainSpec(
            model_path=model_path,
            dataset_path=dataset_path,
            output_dir=output_dir,
            tokenizer_file=tokenizer_file,
            use_lora=use_lora,
            **overrides,
        )
    result = run_train(spec)
    click.echo(
        f"trained {result.rows} rows for {len(result.losses)} steps: "
        f"loss {result.first_loss:.4f} -> {result.last_loss:.4f}"
    )
    click.echo(f"checkpoint written to {result.output_dir}")


@cli.command()
@click.option("--model", "model_dir", required=True, help="Checkpoint directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option(
    "--max-new-tokens", type=int, default=64, show_default=True,
    help="Default generation budget per request.",
)
def serve(model_dir: str, host: str, port: int, max_new_tokens: int) -> None:
    """Serve a checkpoint behind a chat-completions endpoint."""
    import uvicorn

    from sqltrainer.serve import build_app

    app = build_app(model_dir, max_new_tokens=max_new_tokens)
    uvicorn.run(app, host=host, port=port)


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
    except TrainerError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
