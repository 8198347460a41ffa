"""Smoke test for the ssl_lab_py extension module.

Build and run from the repository root:

    cargo build --release -p ssl-lab-py --features extension-module
    cp target/release/libssl_lab_py.so python/ssl_lab_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import ssl_lab_py as ssl


def main():
    assert "vat" in ssl.methods() and "supervised" in ssl.methods()
    assert ssl.hoeffding_n(0.95, 0.01) == 18445
    assert ssl.hoeffding_confidence(18445, 0.01) >= 0.95

    data = ssl.two_moons(1000, 0.1, 0)
    assert len(data) == 1000 and data.num_classes == 2
    assert len(data.points[0]) == 2

    params = ssl.ParameterSet([2, 10, 10, 10, 2], 0)
    probs = params.probabilities(data.points[:5])
    assert all(abs(sum(row) - 1.0) < 1e-12 for row in probs)
    again = ssl.ParameterSet.from_json(params.to_json())
    assert again.logits(data.points[:3]) == params.logits(data.points[:3])

    r_adv = ssl.vat_perturbation(params, data.points[:8], 0.3, seed=1)
    assert all(abs(math.hypot(*row) - 0.3) < 1e-9 for row in r_adv)

    z = [[0.2, 0.8], [0.6, 0.4]]
    assert ssl.ensemble_targets([z], 0.6) == z
    assert ssl.ramp_weight(0, 800, 1.0) == math.exp(-5.0)

    train = json.loads(ssl.train_defaults())
    train["total_steps"] = 200
    record_json, best = ssl.train(data, "vat", seed=0, train_json=json.dumps(train))
    record = json.loads(record_json)
    assert record["method"]["method"] == "vat"
    assert 0.0 <= best.error_rate(data.points, data.labels) <= 1.0

    csv = ssl.boundary_csv(best, resolution=10)
    assert csv.splitlines()[0] == "x,y,p_0,p_1,argmax" and len(csv.splitlines()) == 101

    with tempfile.TemporaryDirectory() as out:
        assert ssl.run_cli(["hoeffding", "--confidence", "0.9", "--p", "0.05"]) == 0
        assert ssl.run_cli(["train", "--out", out]) == 1

    try:
        ssl.two_moons(0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
