"""Shared fixtures: a deterministic labeled corpus, word-vector tables, and
two small locally-built transformer checkpoints with classification heads.
"""

import json
import random
from pathlib import Path

import pytest

NUM_CLASSES = 3

CLASS_WORDS = {
    0: ["great", "happy", "wonderful", "love", "enjoy", "amazing"],
    1: ["terrible", "sad", "awful", "hate", "angry", "annoying"],
    2: ["what", "when", "where", "how", "which", "why"],
}
FILLER = [
    "the", "a", "i", "we", "it", "today", "about", "really", "game",
    "movie", "story", "people", "time", "thing", "very", "so", "was",
]
# Tokens that appear in no vector table; sentences made only of these
# exercise the corpus-mean fallback.
OOV_WORDS = ["zzzq", "qqxz", "xxvk"]

ALL_WORDS = sorted({w for ws in CLASS_WORDS.values() for w in ws} | set(FILLER) | set(OOV_WORDS))


def build_corpus(n: int, seed: int = 0, oov_rows=(13, 14)):
    """n labeled sentences; rows listed in oov_rows contain only OOV tokens."""
    rng = random.Random(seed)
    examples = []
    for i in range(n):
        label = i % NUM_CLASSES
        if i in oov_rows:
            text = " ".join(rng.choices(OOV_WORDS, k=4))
        else:
            words = rng.choices(CLASS_WORDS[label], k=rng.randint(2, 4))
            words += rng.choices(FILLER, k=rng.randint(3, 6))
            rng.shuffle(words)
            text = " ".join(words)
        examples.append({"id": f"ex{i:04d}", "text": text, "label": label})
    return examples


def write_vector_table(path: Path, words, dim: int, seed: int) -> Path:
    rng = random.Random(seed)
    lines = []
    for w in words:
        vec = [f"{rng.uniform(-1.0, 1.0):.6f}" for _ in range(dim)]
        lines.append(w + " " + " ".join(vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_tokenizer(words, directory: Path):
    from transformers import BertTokenizerFast

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + list(words)
    vocab_file = directory / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    try:
        return BertTokenizerFast(vocab=str(vocab_file), do_lower_case=True)
    except TypeError:  # older transformers name the argument vocab_file
        return BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)


def build_checkpoint(path: Path, tokenizer, hidden: int, seed: int, num_labels: int):
    import torch
    from transformers import BertConfig, BertForSequenceClassification

    config = BertConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=hidden,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=2 * hidden,
        max_position_embeddings=128,
        num_labels=num_labels,
    )
    torch.manual_seed(seed)
    model = BertForSequenceClassification(config)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """Two checkpoints (hidden 32 and 48) plus wiki/commonsense tables."""
    root = tmp_path_factory.mktemp("fixtures")
    tokenizer = build_tokenizer(ALL_WORDS, root)
    build_checkpoint(root / "ckpt-tiny", tokenizer, hidden=32, seed=11, num_labels=NUM_CLASSES)
    build_checkpoint(root / "ckpt-mini", tokenizer, hidden=48, seed=13, num_labels=NUM_CLASSES)
    tabled = [w for w in ALL_WORDS if w not in OOV_WORDS]
    write_vector_table(root / "wiki.txt", tabled, dim=16, seed=5)
    write_vector_table(root / "comm.txt", tabled, dim=16, seed=6)
    return root


def write_job(path: Path, fixture_dir: Path, examples, out_dir: str, **overrides) -> Path:
    doc = {
        "num_classes": NUM_CLASSES,
        "examples": examples,
        "checkpoints": [str(fixture_dir / "ckpt-tiny"), str(fixture_dir / "ckpt-mini")],
        "knowledge": {
            "wiki": str(fixture_dir / "wiki.txt"),
            "commonsense": str(fixture_dir / "comm.txt"),
        },
        "batch_size": 32,
        "max_length": 48,
        "output_dir": out_dir,
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path
