"""Smoke test for the hsimvt extension module.

Build it first with `python/build.sh`, which copies the shared library next
to this script.
"""
import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import hsimvt  # noqa: E402


def main():
    cube, labels = hsimvt.synth(seed=1, height=24, width=24, bands=40)
    assert cube.shape == (24, 24, 40)
    assert labels.classes == 3

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cube.hsz")
        cube.save(path)
        again = hsimvt.Cube.load(path)
        assert again.values() == cube.values()

    norm = hsimvt.mmnorm(cube)
    values = norm.values()
    assert min(values) == 0.0 and max(values) == 1.0

    rep = hsimvt.preprocess(cube)
    assert rep.shape == (24, 24, 30)
    assert hsimvt.mpca(norm, 10, 3).values() == rep.values()

    config = json.dumps({
        "patch_size": 3, "views": 10, "view_components": 3, "k1": 2, "k2": 8,
        "k3": 16, "heads": 2, "feature_dim": 8, "num_classes": 3,
        "use_mpca": True, "use_sed": True, "use_global_token": True,
    })
    model, history = hsimvt.train(rep, labels, config, epochs=15, lr=1e-2, batch=16)
    assert len(history) == 15
    assert history[-1]["train_loss"] < history[0]["train_loss"]

    patch = [0.0] * (3 * 3 * 30)
    logits = model.forward(patch)
    assert len(logits) == 3
    assert model.predict(patch) in (1, 2, 3)

    report = hsimvt.evaluate(model, rep, labels)
    assert 0.0 <= report["oa"] <= 1.0
    audit = hsimvt.audit(model, rep, labels)
    assert audit["original"]["counts"] == audit["rotated"]["counts"]

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.hsz")
        model.save(path)
        loaded = hsimvt.Model.load(path)
        assert loaded.forward(patch) == logits

    try:
        hsimvt.Cube(2, 2, 2, [0.0] * 7)
    except ValueError:
        pass
    else:
        raise AssertionError("bad cube accepted")

    print(f"ok: test OA {report['oa']:.3f}, rotation delta {audit['delta_oa']:+.4f}")


if __name__ == "__main__":
    main()
