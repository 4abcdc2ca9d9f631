"""Expert training-set assembly: mixing, ablations, subsampling, file IO.

A training example is an id-only prompt (no schema text) plus a SQL
completion. Mixing combines one target database's synthetic pairs with
original out-of-domain data under a seeded global shuffle. Ablations
reproduce the four standard component-removal variants. Every emitted
dataset carries a manifest with per-source counts, the seed, and a content
hash so reruns are verifiable.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace

from rotesql.errors import DatasetError
from rotesql.genclient import SynthPair
from rotesql.promptkit import ID_ONLY_TEMPLATE

SOURCE_SYNTHETIC = "synthetic"
SOURCE_ORIGINAL = "original"
DB_MARKER_PREFIX = "database: "

ABLATION_VARIANTS = ("no_original", "no_synthetic", "no_db_id", "single_model")


@dataclass(frozen=True)
class TrainingExample:
    db_id: str | None
    prompt: str
    completion: str
    source: str
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise DatasetError("prompt must be non-empty")
        if not self.completion:
            raise DatasetError("completion must be non-empty")
        if self.source not in (SOURCE_SYNTHETIC, SOURCE_ORIGINAL):
            raise DatasetError(f"unknown example source {self.source!r}")
        if self.weight <= 0:
            raise DatasetError("weight must be positive")


@dataclass
class ExpertManifest:
    expert_id: str
    targets: list[str]
    counts: dict[str, int] = field(default_factory=dict)
    ablation: str | None = None
    seed: int = 0
    content_hash: str = ""
    dataset_path: str = ""

    def to_json(self) -> dict:
        return {
            "expert_id": self.expert_id,
            "targets": self.targets,
            "counts": self.counts,
            "ablation": self.ablation,
            "seed": self.seed,
            "content_hash": self.content_hash,
            "dataset_path": self.dataset_path,
        }


@dataclass(frozen=True)
class AblationConfig:
    no_original: bool = False
    no_synthetic: bool = False
    no_db_id: bool = False
    single_model: bool = False

    def variant(self) -> str:
        chosen = [
            name
            for name in ABLATION_VARIANTS
            if getattr(self, name)
        ]
        if len(chosen) != 1:
            raise DatasetError(
                f"exactly one ablation flag must be set, got {chosen or 'none'}"
            )
        return chosen[0]


def _prompt_for(db_id: str, question: str) -> str:
    return ID_ONLY_TEMPLATE.format(db_id=db_id, question=question)


def _serialize(example: TrainingExample) -> str:
    return json.dumps(
        {
            "db_id": example.db_id,
            "prompt": example.prompt,
            "completion": example.completion,
            "source": example.source,
            "weight": example.weight,
        },
        sort_keys=True,
    )


def dataset_content_hash(examples: list[TrainingExample]) -> str:
    digest = hashlib.sha256()
    for example in examples:
        digest.update(_serialize(example).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def _counts(examples: list[TrainingExample]) -> dict[str, int]:
    counts = {SOURCE_SYNTHETIC: 0, SOURCE_ORIGINAL: 0}
    for example in examples:
        counts[example.source] += 1
    return counts


def mix(
    synthetic: list[SynthPair],
    original: list[tuple[str, str, str]],
    shuffle_seed: int,
) -> tuple[list[TrainingExample], ExpertManifest]:
    """Combine one target's synthetic pairs with out-of-domain originals.

    Original rows keep their own db_id in the prompt; their schemas never
    appear anywhere. The union is shuffled globally under the seed.
    """
    targets = sorted({p.db_id for p in synthetic})
    if len(targets) > 1:
        raise DatasetError(f"synthetic pairs span multiple targets: {targets}")
    examples = [
        TrainingExample(
            db_id=p.db_id,
            prompt=_prompt_for(p.db_id, p.nlq),
            completion=p.sql,
            source=SOURCE_SYNTHETIC,
        )
        for p in synthetic
    ]
    examples.extend(
        TrainingExample(
            db_id=db_id,
            prompt=_prompt_for(db_id, nlq),
            completion=sql,
            source=SOURCE_ORIGINAL,
        )
        for db_id, nlq, sql in original
    )
    random.Random(shuffle_seed).shuffle(examples)
    target = targets[0] if targets else "untargeted"
    manifest = ExpertManifest(
        expert_id=f"expert-{target}",
        targets=targets,
        counts=_counts(examples),
        ablation=None,
        seed=shuffle_seed,
        content_hash=dataset_content_hash(examples),
    )
    return examples, manifest


def strip_db_marker(prompt: str) -> str:
    lines = prompt.split("\n")
    kept = [line for line in lines if not line.startswith(DB_MARKER_PREFIX)]
    return "\n".join(kept)


def ablate(
    config: AblationConfig,
    mixes: list[tuple[list[TrainingExample], ExpertManifest]],
) -> tuple[list[TrainingExample], ExpertManifest]:
    """Produce one dataset variant per the component-removal grid.

    Row-level variants (no_original, no_synthetic, no_db_id) act on exactly
    one mixed dataset. single_model merges every target's synthetic rows and
    deduplicated originals into one expert.
    """
    variant = config.variant()
    if not mixes:
        raise DatasetError("ablate needs at least one mixed dataset")
    if variant != "single_model":
        if len(mixes) != 1:
            raise DatasetError(f"{variant} applies to exactly one mixed dataset")
        examples, manifest = mixes[0]
        if variant == "no_original":
            kept = [e for e in examples if e.source == SOURCE_SYNTHETIC]
        elif variant == "no_synthetic":
            kept = [e for e in examples if e.source == SOURCE_ORIGINAL]
        else:  # no_db_id: strip the marker during training (and at inference)
            kept = [
                replace(e, db_id=None, prompt=strip_db_marker(e.prompt))
                for e in examples
            ]
        out = ExpertManifest(
            expert_id=manifest.expert_id + f"-{variant}",
            targets=list(manifest.targets),
            counts=_counts(kept),
            ablation=variant,
            seed=manifest.seed,
            content_hash=dataset_content_hash(kept),
        )
        return kept, out

    merged: list[TrainingExample] = []
    seen_originals: set[tuple] = set()
    targets: list[str] = []
    for examples, manifest in mixes:
        targets.extend(t for t in manifest.targets if t not in targets)
        for example in examples:
            if example.source == SOURCE_SYNTHETIC:
                merged.append(example)
            else:
                key = (example.db_id, example.prompt, example.completion)
                if key in seen_originals:
                    continue
                seen_originals.add(key)
                merged.append(example)
    seed = mixes[0][1].seed
    random.Random(seed).shuffle(merged)
    out = ExpertManifest(
        expert_id="expert-merged",
        targets=targets,
        counts=_counts(merged),
        ablation=variant,
        seed=seed,
        content_hash=dataset_content_hash(merged),
    )
    return merged, out


def subsample_synthetic(
    pairs: list[SynthPair], n: int, seed: int
) -> list[SynthPair]:
    """Uniform sample without replacement, input order preserved."""
    if n < 0:
        raise DatasetError("sample size must be non-negative")
    if n > len(pairs):
        raise DatasetError(f"cannot sample {n} from {len(pairs)} pairs")
    indexes = sorted(random.Random(seed).sample(range(len(pairs)), n))
    return [pairs[i] for i in indexes]


def emit_dataset(examples: list[TrainingExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(_serialize(example) + "\n")


def load_dataset(path: str) -> list[TrainingExample]:
    examples: list[TrainingExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                examples.append(
                    TrainingExample(
                        db_id=record["db_id"],
                        prompt=record["prompt"],
                        completion=record["completion"],
                        source=record["source"],
                        weight=record.get("weight", 1.0),
                    )
                )
            except (json.JSONDecodeError, KeyError, DatasetError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad dataset line: {exc}")
    return examples


def write_manifest(manifest: ExpertManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str) -> ExpertManifest:
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    return ExpertManifest(
        expert_id=record["expert_id"],
        targets=record["targets"],
        counts=record["counts"],
        ablation=record["ablation"],
        seed=record["seed"],
        content_hash=record["content_hash"],
        dataset_path=record.get("dataset_path", ""),
    )
