#!/usr/bin/env python3
"""Smoke test for the stereofuse_py extension module.

Builds the cdylib with cargo, copies it next to this script as
stereofuse_py.so, then runs a tiny end-to-end fusion and checks the
result. Exit code 0 means everything works.
"""

import math
import random
import shutil
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "stereofuse-py", "--release"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "release" / "libstereofuse_py.so"
    target = HERE / "stereofuse_py.so"
    shutil.copyfile(built, target)
    return target


def main() -> int:
    build_extension()
    sys.path.insert(0, str(HERE))
    import stereofuse_py as sf

    # tiny constant-disparity pair: right is left shifted by d=3
    w, h, d = 48, 36, 3
    rng = random.Random(7)
    left_data = [rng.random() for _ in range(w * h)]
    right_data = [
        left_data[y * w + max(x - d, 0)] for y in range(h) for x in range(w)
    ]
    left = sf.GrayImage(w, h, left_data)
    right = sf.GrayImage(w, h, right_data)
    assert left.width == w and left.height == h
    assert abs(left.at(5, 5) - left_data[5 * w + 5]) < 1e-6

    prior = sf.SparsePrior(
        [(x, y, float(d)) for y in range(2, h, 5) for x in range(2, w, 5)]
    )
    assert len(prior) > 0

    params = sf.FusionParams()
    params.set("d_max", "12")
    params.set("criterion", "emcc")
    assert params.d_max == 12

    result = sf.fuse(left, right, prior, params)
    disp = result.disparity
    assert disp.width == w and disp.height == h
    assert result.fully_dense, "expected a dense result after filling"

    good = sum(
        1
        for y in range(6, h - 6)
        for x in range(8, w - 6)
        if abs(disp.get(x, y) - d) < 1.0
    )
    total = (h - 12) * (w - 14)
    assert good > 0.9 * total, f"only {good}/{total} pixels near d={d}"

    # values() marks nothing invalid here
    vals = disp.values()
    assert len(vals) == w * h
    assert not any(math.isnan(v) for v in vals)

    # simulation + scoring round trip on the built-in scene
    s_left, s_right, gt, occluded, s_prior = sf.simulate("two_planes", seed=3)
    assert s_left.width == 320 and gt.height == 240
    assert len(occluded) == 320 * 240
    assert sf.bmp(gt, gt, 1.0, occluded) == 0.0
    assert sf.mse(gt, gt) == 0.0
    assert len(s_prior) > 500

    # bad parameter values surface as ValueError
    try:
        params.set("r", "0")
    except ValueError:
        pass
    else:
        raise AssertionError("r=0 should be rejected")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
