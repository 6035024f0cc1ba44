"""Smoke test for the pyrcmlab extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import json
import math
import os
import sys
import tempfile

import pyrcmlab as rl


def main():
    phi = rl.Phi.gilbert(1.0)
    assert abs(phi.m_phi(2) - math.pi) < 1e-12
    assert phi(0.5) == 1.0 and phi(1.5) == 0.0
    assert phi.dominates(rl.Phi.scaled_indicator(0.5, 1.0))

    w = rl.Window.cube(2, 5.0)
    assert w.volume == 100.0 and w.inradius == 5.0

    g = rl.Graph.sample(w, phi, 1.0, 2.0, seed=7)
    pts = g.points()
    assert len(pts) == len(g) > 0
    for a, b in g.edges():
        assert math.dist(pts[a], pts[b]) <= 1.0
    c = g.census(w)
    assert c["total_inside"] == sum(c["inside_by_order"].values())

    iso = rl.Functional('{"kind": "count_order", "k": 1, "mode": "lexmin"}', w, phi, 1.0)
    values = iso.sample_values(300, seed=1)
    mean = sum(values) / len(values)
    exact = math.exp(-math.pi) * w.volume
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
    assert abs(mean - exact) < 4 * sd / math.sqrt(len(values)), (mean, exact)

    rho, se = rl.expected_intensity(rl.class_id([(0, 1)], 2), phi, 1.0, samples=50_000)
    assert rho > 0 and se >= 0

    assert rl.kolmogorov_distance([0.0, 0.0]) == 0.5
    assert rl.wasserstein_distance([-1.0, 1.0]) > 0

    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "scenario.json")
        with open(cfg, "w") as f:
            json.dump(
                {
                    "dim": 2,
                    "beta": 1.0,
                    "phi": {"kind": "gilbert", "r": 1.0},
                    "ladder": [3],
                    "statistics": [{"kind": "point_count"}],
                    "replicates": 50,
                },
                f,
            )
        out = rl.run_scenario(cfg, "census", out=os.path.join(tmp, "results"), seed=3)
        with open(os.path.join(out, "r0", "summary.json")) as f:
            summary = json.load(f)
        assert summary["seed_base"] == 3 and summary["replicates"] == 50

    try:
        rl.Phi.gilbert(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative range accepted")

    print("pyrcmlab smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
