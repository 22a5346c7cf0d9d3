"""Smoke test for the Python bindings.

Imports an installed `artreg` module if there is one, otherwise builds the
extension with cargo and loads it from target/release.

    python3 python/smoke_test.py
"""

import importlib.util
import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_artreg():
    try:
        import artreg

        return artreg
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "--release", "-p", "artreg-py"], cwd=ROOT, check=True)
    built = ROOT / "target" / "release" / "libartreg_py.so"
    dest = Path(tempfile.mkdtemp()) / "artreg.so"
    shutil.copy(built, dest)
    spec = importlib.util.spec_from_file_location("artreg", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def box_points(dims, spacing):
    hx, hy, hz = (d / 2 for d in dims)
    pts = []
    n = [max(2, round(d / spacing) + 1) for d in dims]
    for i in range(n[0]):
        for j in range(n[1]):
            for k in range(n[2]):
                on_face = i in (0, n[0] - 1) or j in (0, n[1] - 1) or k in (0, n[2] - 1)
                if on_face:
                    pts.append([-hx + 2 * hx * i / (n[0] - 1), -hy + 2 * hy * j / (n[1] - 1), -hz + 2 * hz * k / (n[2] - 1)])
    return pts


def apply(pose, pts):
    return [[sum(pose[r][c] * p[c] for c in range(3)) + pose[r][3] for r in range(3)] for p in pts]


def main():
    artreg = load_artreg()

    xi = [0.1, -0.2, 0.3, 0.05, 0.0, -0.02]
    back = artreg.log_se3(artreg.exp_se3(xi))
    assert max(abs(a - b) for a, b in zip(xi, back)) < 1e-12, back

    model = box_points([0.1, 0.06, 0.04], 0.01)
    identity = artreg.exp_se3([0.0] * 6)
    assert artreg.adi(model, identity, identity) == 0.0

    truth = artreg.exp_se3([0.0, 0.0, 0.1, 0.5, 0.02, 0.02])
    start = artreg.exp_se3([0.0, 0.0, 0.1, 0.52, 0.02, 0.02])
    tracker = artreg.Tracker(model, start, seed=1)
    observed = apply(truth, model)
    for _ in range(20):
        tracker.step(observed)
    est = tracker.pose()
    err = math.dist([r[3] for r in est[:3]], [r[3] for r in truth[:3]])
    # started 2 cm off
    assert err < 5e-3, err

    assert "side-revolute" in artreg.builtin_scenes()
    report = json.loads(artreg.detect("side-revolute", 2))
    assert report["hypothesis"] == "revolute", report["hypothesis"]

    bench = json.loads(artreg.bench(["blade-like"], 1, 3))
    assert len(bench["trials"]) == 1

    try:
        artreg.detect("no-such-scene", 0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scene accepted")

    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
