#!/usr/bin/env python3
"""Smoke test for the `floodpulse` extension module.

Builds nothing itself: it expects the shared library produced by

    cargo build -p floodpulse-py --release --features extension-module

and imports it straight out of the target directory (copying
``libfloodpulse.so`` to ``floodpulse.so`` in a temp dir so CPython
accepts the module name). Exits non-zero on the first failed check.
"""

from __future__ import annotations

import math
import shutil
import sys
import tempfile
from pathlib import Path

WORKSPACE = Path(__file__).resolve().parents[1]


def load_module():
    candidates = [
        WORKSPACE / "target" / "release" / "libfloodpulse.so",
        WORKSPACE / "target" / "debug" / "libfloodpulse.so",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit(
            "libfloodpulse.so not found; run "
            "`cargo build -p floodpulse-py --release --features extension-module`"
        )
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="floodpulse-py-"))
    shutil.copy2(newest, stage / "floodpulse.so")
    sys.path.insert(0, str(stage))
    import floodpulse

    print(f"loaded {newest}")
    return floodpulse


def check_sentiment(fp):
    lex = fp.Lexicon({"good": 1.9, "great": 3.1, "terrible": -2.1}, ["not", "no"])
    assert len(lex) == 3
    assert fp.tokenize("Not GOOD, at all!") == ["not", "good", "at", "all"]

    # compound = S / sqrt(S^2 + 15)
    s = lex.score("good")
    assert math.isclose(s, 1.9 / math.sqrt(1.9**2 + 15), rel_tol=0, abs_tol=1e-12)
    assert lex.score("not good") == -s  # negation within three tokens flips
    assert lex.score("completely unknown words") == 0.0
    assert lex.polarity("great news") == "positive"
    assert lex.polarity("terrible flooding here") == "negative"
    assert lex.polarity("") == "neutral"

    # polarity boundaries sit exactly at +/-0.05
    assert fp.POLARITY_CUT == 0.05
    assert fp.classify_polarity(0.05) == "positive"
    assert fp.classify_polarity(-0.05) == "negative"
    assert fp.classify_polarity(0.049999) == "neutral"
    print("sentiment ok")


def check_features(fp):
    names = fp.feature_names()
    assert len(names) == fp.N_FEATURES == 10
    assert names[0] == "FE1" and names[-1] == "FE10"

    assert fp.deviation_pct(200.0, 150.0) == 25.0  # drop below baseline is positive
    assert fp.deviation_pct(40.0, 70.0) == -75.0  # rise above baseline is negative
    assert fp.deviation_pct(0.0, 5.0) is None  # zero baseline is undefined
    assert fp.deviation_pct(None, 5.0) is None
    assert fp.deviation_pct(5.0, None) is None
    print("features ok")


def check_labels(fp):
    values = {f"z{i}": float(i) for i in range(1, 10)}
    two = fp.label_zones(values, "claims", 2)
    # the median of 1..9 is 5; a value exactly at the cut takes the lower class
    assert [two[f"z{i}"] for i in range(1, 10)] == [0, 0, 0, 0, 0, 1, 1, 1, 1]

    wet = fp.label_zones({"a": 0.0, "b": 0.0, "c": 4.0, "d": 8.0}, "inundation", 2)
    assert wet == {"a": 0, "b": 0, "c": 1, "d": 1}  # zeros form class 0

    try:
        fp.label_zones({"a": 1.0, "b": 1.0, "c": 2.0}, "claims", 3)
    except ValueError:
        pass
    else:
        raise AssertionError("2 distinct values must not support 3 classes")

    assert fp.percentile_linear([1.0, 2.0, 3.0, 4.0], 50.0) == 2.5
    print("labels ok")


def check_forest(fp):
    assert fp.gini([5, 5]) == 0.5
    assert fp.gini([10, 0]) == 0.0
    assert math.isclose(fp.gini([4, 4, 4]), 2 / 3, rel_tol=0, abs_tol=1e-15)
    # a perfect split recovers the whole parent impurity
    assert fp.delta_gini([5, 5], [5, 0], [0, 5]) == fp.gini([5, 5])
    assert math.isclose(fp.micro_f1([0, 1, 2], [0, 1, 1]), 2 / 3, abs_tol=1e-15)

    # 90 rows, 3 classes; column 0 carries the signal, column 1 is constant,
    # column 2 is structured noise.
    x, y = [], []
    for i in range(90):
        cls = i % 3
        x.append([cls + 0.1 * ((i * 7) % 5), 3.25, ((i * 31) % 17) / 17.0])
        y.append(cls)
    model = fp.RandomForest.fit(x, y, 3, n_trees=60, seed=11)
    assert repr(model) == "RandomForest(n_trees=60, n_classes=3, feature_count=3)"

    predictions = model.predict_batch(x)
    accuracy = sum(p == t for p, t in zip(predictions, y)) / len(y)
    assert accuracy >= 0.95, f"training accuracy only {accuracy}"
    assert model.predict(x[4]) == predictions[4]

    imp = model.importance()
    assert math.isclose(sum(imp), 1.0, abs_tol=1e-12)
    assert imp[0] == max(imp)  # the signal column dominates
    assert imp[1] == 0.0  # a constant column earns exactly zero
    assert fp.rank_features(imp)[0] == 1

    # same seed -> bit-identical model, with or without parallel scheduling
    again = fp.RandomForest.fit(x, y, 3, n_trees=60, seed=11, parallel=True)
    assert model.to_json() == again.to_json()
    other = fp.RandomForest.fit(x, y, 3, n_trees=60, seed=12)
    assert model.to_json() != other.to_json()

    revived = fp.RandomForest.from_json(model.to_json())
    assert revived.predict_batch(x) == predictions
    print("forest ok")


def check_analysis(fp):
    assert fp.rank_features([0.5, 0.3, 0.2]) == [1, 2, 3]
    assert fp.rank_features([0.4, 0.4, 0.2]) == [1, 1, 3]  # competition ties

    # all day-to-day changes within k=2 -> the whole track is one run
    assert fp.persistence([1, 1, 2, 1]) == (4, (1, 2))
    # a jump of 4 breaks the run on both sides of the 5
    assert fp.persistence([1, 5, 1, 1], k=2) == (2, (1, 1))
    print("analysis ok")


def main():
    fp = load_module()
    check_sentiment(fp)
    check_features(fp)
    check_labels(fp)
    check_forest(fp)
    check_analysis(fp)
    print("smoke test passed")


if __name__ == "__main__":
    main()
