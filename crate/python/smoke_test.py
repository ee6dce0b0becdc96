"""Smoke test for the `wic` extension module.

Build and run from the repository root:

    cargo build --release -p wic-py --features extension-module
    cp target/release/libwic.so python/wic.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import wic  # noqa: E402


def check_pair_and_errors():
    pair = wic.Pair("p1", "bank", "the bank closed", (4, 8), "a river bank", (8, 12), label=False)
    assert pair.targets() == ("bank", "bank")
    assert pair.span2 == (8, 12)
    try:
        wic.Pair("p2", "bank", "bank", (0, 9), "bank", (0, 4))
    except wic.WicError:
        pass
    else:
        raise AssertionError("out-of-range span accepted")
    corpus = wic.Corpus([pair])
    assert len(corpus) == 1 and corpus[-1].id == "p1"


def check_numerics():
    assert wic.max_pool([[1.0, 5.0], [3.0, 2.0], [0.0, 9.0]], [0, 1]) == [3.0, 5.0]
    assert math.isclose(wic.cosine_score([1.0, 0.0], [1.0, 0.0]), 1.0)
    assert wic.cosine_score([1.0, 0.0], [-1.0, 0.0], "relu") == 0.0
    assert math.isclose(wic.cosine_score([1.0, 0.0], [0.0, 1.0], "sigmoid"), 0.5)
    assert math.isclose(wic.bce_loss(0.5, True), math.log(2.0))

    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [False, False, True, True]
    threshold, j = wic.youden_threshold(scores, labels)
    # Candidates sit between distinct scores; the J tie goes to the larger one.
    assert math.isclose(threshold, 0.6) and j == 0.5, (threshold, j)
    points = wic.roc_curve(scores, labels)
    assert len(points) == len(scores) + 1
    assert points[0][1:] == (1.0, 1.0) and points[-1][1:] == (0.0, 0.0)


def check_training_round_trip():
    corpus = wic.synthetic(pairs=300, seed=1)
    train, validation = wic.split_by_lemma(corpus, train_fraction=0.8, seed=1)
    assert set(train.lemmas()).isdisjoint(validation.lemmas())
    assert len(train) + len(validation) == 300

    model = wic.train_toy(train, validation, head="cosine-relu", max_epochs=4, seed=1)
    assert 0.0 < model.threshold <= 1.0
    assert 1 <= model.best_check <= len(model.validation_losses)
    predictions = model.predict(validation)
    report = wic.evaluate(predictions, validation)
    print(f"toy cosine-relu validation accuracy {report['accuracy']:.3f}")
    assert report["accuracy"] >= 0.8

    mlp = wic.train_toy(train, validation, head="mlp", max_epochs=1, seed=1)
    assert mlp.threshold == 0.5

    with tempfile.TemporaryDirectory() as tmp:
        model.save(os.path.join(tmp, "ckpt"))
        reloaded = wic.Model.load(os.path.join(tmp, "ckpt"))
        assert reloaded.scores(validation) == model.scores(validation)
        validation.write_mclwic(os.path.join(tmp, "v.data"), os.path.join(tmp, "v.gold"))
        again = wic.load_mclwic_files(os.path.join(tmp, "v.data"), os.path.join(tmp, "v.gold"))
        assert again.ids() == validation.ids() and again.labels() == validation.labels()
        wic.write_submission(os.path.join(tmp, "sub.json"), predictions)
        try:
            wic.load_mclwic_files(os.path.join(tmp, "missing.data"))
        except wic.DataError:
            pass
        else:
            raise AssertionError("missing file accepted")


def main():
    assert "bert-large-cased" in wic.known_encoders()
    check_pair_and_errors()
    check_numerics()
    check_training_round_trip()
    print("python smoke test passed")


if __name__ == "__main__":
    main()
