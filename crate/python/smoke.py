"""Smoke test for the kbqa_py extension.

Run `cargo build -p kbqa-py --release` first, or install the module with
`maturin develop -m crates/python/Cargo.toml`.
"""

import importlib
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "core" / "data" / "synthetic"


def import_module():
    try:
        return importlib.import_module("kbqa_py")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libkbqa_py.so"
        if lib.exists():
            d = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(d, "kbqa_py.so"))
            sys.path.insert(0, d)
            return importlib.import_module("kbqa_py")
    sys.exit("kbqa_py not found: build it with `cargo build -p kbqa-py --release`")


def main():
    kbqa = import_module()

    kb = kbqa.KnowledgeBase.load(DATA / "kb.tsv")
    assert len(kb) > 0
    assert kb.execute("(obama)-[spouse]->(?q)") == ["michelle"]

    lf = "(?v0)-[spouse]->(?q) ; (?v0)-[position_held]->(president)"
    assert kbqa.inline_form(lf) == "(?v0)-[position_held]->(president) ; (?v0)-[spouse]->(?q)"
    assert kbqa.canonical_form(lf) == "(?v0)-[position_held]->(president)\n(?v0)-[spouse]->(?q)"
    try:
        kbqa.inline_form("NOT A FORM")
        raise AssertionError("expected ValueError")
    except ValueError:
        pass

    line = (DATA / "dataset.tsv").read_text().splitlines()[0]
    fields = dict(f.split("=", 1) for f in line.split("\t"))
    gold = fields["gold"]
    assert gold in kbqa.candidates(kb, line, DATA / "config.txt")

    err, passed = kbqa.grad_check(0)
    assert passed, err

    with tempfile.TemporaryDirectory() as d:
        config = Path(d) / "run.conf"
        config.write_text(
            f"seed = 7\nepochs = 300\nlexicon = {DATA / 'lexicon.txt'}\ntriggers = {DATA / 'triggers.txt'}\n"
        )
        ckpt = Path(d) / "model.json"
        model = kbqa.Model.train(kb, DATA / "dataset.tsv", config, ckpt)
        assert model.epochs == 300
        assert len(model.loss_log.splitlines()) == 300
        p, r, f1 = model.evaluate(kb, DATA / "dataset.tsv")
        assert f1 >= 0.95, (p, r, f1)

        reloaded = kbqa.Model.load(ckpt)
        assert reloaded.evaluate(kb, DATA / "dataset.tsv") == (p, r, f1)
        form, answers = reloaded.predict(kb, line)
        assert form == gold, form
        ranked = reloaded.rank(kb, line)
        assert ranked[0][0] == gold and ranked[0][1] is not None
        print(f"macro P/R/F1 {p:.3f}/{r:.3f}/{f1:.3f}; {fields['id']} -> {', '.join(answers)}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
