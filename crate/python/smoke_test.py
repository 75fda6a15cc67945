#!/usr/bin/env python3
"""Smoke test for the nametag Python extension module.

Builds nothing itself: run `cargo build -p nametag-python` (or --release)
first. The script locates the compiled cdylib, stages it under an
importable name, and drives a small end-to-end run: gradient check,
synthetic corpus, training, prediction, evaluation, and checkpoint I/O.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def stage_module(tmp: Path) -> None:
    candidates = [
        REPO_ROOT / "target" / "release" / "libnametag.so",
        REPO_ROOT / "target" / "debug" / "libnametag.so",
        REPO_ROOT / "target" / "release" / "libnametag.dylib",
        REPO_ROOT / "target" / "debug" / "libnametag.dylib",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit(
            "nametag extension not found; run `cargo build -p nametag-python` first"
        )
    newest = max(built, key=lambda p: p.stat().st_mtime)
    suffix = ".so" if newest.suffix == ".so" else ".so"  # CPython loads .so on macOS too
    shutil.copy2(newest, tmp / f"nametag{suffix}")
    sys.path.insert(0, str(tmp))


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="nametag_smoke_"))
    stage_module(tmp)
    import nametag

    # Gradient self-check over both architectures.
    err = nametag.gradcheck(seed=7)
    assert err <= 1e-4, f"gradient check failed: {err}"
    print(f"PASS gradcheck (max rel. error {err:.2e})")

    # Tokenizer detaches terminal punctuation.
    assert nametag.tokenize("add Erica Gupta to my plan.") == [
        "add", "Erica", "Gupta", "to", "my", "plan", ".",
    ]
    print("PASS tokenize")

    # Tiny synthetic corpus.
    data_dir = tmp / "data"
    n_train, n_test = nametag.build_synthetic_data(
        data_dir, countries=4, names_per_country=30, n_templates=20,
        test_fraction=0.2, seed=11,
    )
    assert n_train > 0 and n_test > 0
    print(f"PASS build_synthetic_data ({n_train} train / {n_test} test)")

    # Overfit a small word+char model on the training split.
    ckpt = nametag.train(
        data_dir / "train.jsonl", arch="wordchar", epochs=150, batch_size=16,
        lr=2e-3, seed=11, word_dim=16, char_dim=8, char_hidden=8, word_hidden=12,
    )
    assert ckpt.architecture == "wordchar"
    assert ckpt.loss_history[-1] < ckpt.loss_history[0]
    print(f"PASS train (loss {ckpt.loss_history[0]:.3f} -> {ckpt.loss_history[-1]:.4f})")

    # The model must extract a name it was trained on.
    first_train = json.loads((data_dir / "train.jsonl").read_text().splitlines()[0])
    name = first_train["meta"]["name_first"]
    spans = ckpt.predict(f"please add {name} to my dental plan")
    assert any(name in s["text"] for s in spans), f"{name} not found in {spans}"
    print(f"PASS predict (found {spans[0]['text']!r})")

    # Evaluation report has the documented shape.
    report = ckpt.evaluate(data_dir / "train.jsonl")
    assert 0.0 <= report["overall"]["strict_acc"] <= 1.0
    assert report["overall"]["partial_acc"] >= report["overall"]["strict_acc"]
    assert set(report) >= {"overall", "by_country", "by_gender", "first_last"}
    print(f"PASS evaluate (train strict {report['overall']['strict_acc']:.3f})")

    # Checkpoint round-trip preserves predictions.
    ckpt_path = tmp / "model.ckpt"
    ckpt.save(ckpt_path)
    reloaded = nametag.load(ckpt_path)
    line = "can you check the dental claim for " + name
    assert reloaded.predict_tags(line) == ckpt.predict_tags(line)
    print("PASS checkpoint round-trip")

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
