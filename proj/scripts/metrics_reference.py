"""Reference pipeline for the metrics fixture pair.

`generate` writes tests/fixtures/metrics_gen.json and metrics_gt.json from a
fixed numpy seed; `expected` recomputes every metric with straightforward numpy
/ scipy code (explicit window loops, map_coordinates resampling, sqrtm) and
writes the oracle values the C++ tests compare against.

    python scripts/metrics_reference.py generate tests/fixtures
    python scripts/metrics_reference.py expected tests/fixtures
"""

import json
import math
import os
import sys

import numpy as np
from scipy import linalg, ndimage

SEED = 20240917
SIDE = 48
LEVELS = (1, 2, 3, 4)
ANGLES = (0.0, 45.0, 90.0)
TAU = 0.05
WINDOW = 11


def smooth_texture(rng, side):
    base = rng.random((side, side))
    img = ndimage.gaussian_filter(base, sigma=2.0, mode="wrap")
    img = (img - img.min()) / (img.max() - img.min())
    return 0.1 + 0.8 * img


def generate(out_dir):
    rng = np.random.default_rng(SEED)
    gt, gen = [], []
    # Noise levels chosen so the pairs straddle tau at different mip levels.
    for noise in (0.0, 0.01, 0.03, 0.08):
        t = smooth_texture(rng, SIDE)
        g = np.clip(t + noise * rng.standard_normal(t.shape), 0.0, 1.0)
        gt.append(t)
        gen.append(g)
    feat_gt = rng.standard_normal((64, 4))
    feat_gen = 0.9 * rng.standard_normal((64, 4)) + 0.2

    def doc(textures, feats):
        return {
            "textures": [{"shape": list(t.shape), "data": [float(v) for v in t.ravel()]} for t in textures],
            "features": {"shape": list(feats.shape), "data": [float(v) for v in feats.ravel()]},
        }

    for name, textures, feats in (("metrics_gen.json", gen, feat_gen), ("metrics_gt.json", gt, feat_gt)):
        with open(os.path.join(out_dir, name), "w") as f:
            json.dump(doc(textures, feats), f)
            f.write("\n")


def load(path):
    with open(path) as f:
        d = json.load(f)
    textures = [np.array(t["data"], dtype=np.float64).reshape(t["shape"]) for t in d["textures"]]
    feats = np.array(d["features"]["data"], dtype=np.float64).reshape(d["features"]["shape"])
    return textures, feats


def ssim(a, b, k=WINDOW):
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for r in range(a.shape[0] - k + 1):
        for c in range(a.shape[1] - k + 1):
            x = a[r:r + k, c:c + k]
            y = b[r:r + k, c:c + k]
            mx, my = x.mean(), y.mean()
            vx, vy = ((x - mx) ** 2).mean(), ((y - my) ** 2).mean()
            cov = ((x - mx) * (y - my)).mean()
            vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def downsample(img, level):
    for _ in range(level):
        h, w = img.shape
        if h % 2:
            img = np.vstack([img, img[-1:]])
        if w % 2:
            img = np.hstack([img, img[:, -1:]])
        img = 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])
    return img


def rotation_sources(h, w, deg, rows, cols):
    th = math.radians(deg)
    cy, cx = (h - 1) / 2, (w - 1) / 2
    dx, dy = cols - cx, rows - cy
    return cx + math.cos(th) * dx + math.sin(th) * dy, cy - math.sin(th) * dx + math.cos(th) * dy


def crop_side(h, w, deg):
    for s in range(min(h, w), 0, -1):
        r0, c0 = (h - s) // 2, (w - s) // 2
        rows, cols = np.mgrid[r0:r0 + s, c0:c0 + s].astype(np.float64)
        x, y = rotation_sources(h, w, deg, rows, cols)
        tol = 1e-9
        if (x >= -tol).all() and (y >= -tol).all() and (x <= w - 1 + tol).all() and (y <= h - 1 + tol).all():
            return s
    return 0


def rotate_crop(img, deg, s):
    h, w = img.shape
    r0, c0 = (h - s) // 2, (w - s) // 2
    rows, cols = np.mgrid[r0:r0 + s, c0:c0 + s].astype(np.float64)
    x, y = rotation_sources(h, w, deg, rows, cols)
    x = np.clip(x, 0, w - 1)
    y = np.clip(y, 0, h - 1)
    return ndimage.map_coordinates(img, [y, x], order=1, mode="nearest")


def frechet(fa, fb):
    ma, mb = fa.mean(0), fb.mean(0)
    sa, sb = np.cov(fa, rowvar=False), np.cov(fb, rowvar=False)
    root = linalg.sqrtm(sa @ sb).real
    return float(((ma - mb) ** 2).sum() + np.trace(sa + sb - 2 * root))


def expected(out_dir):
    gen, fgen = load(os.path.join(out_dir, "metrics_gen.json"))
    gt, fgt = load(os.path.join(out_dir, "metrics_gt.json"))
    ssims = [ssim(a, b) for a, b in zip(gen, gt)]
    adfs = []
    for a, b in zip(gen, gt):
        per = []
        for deg in ANGLES:
            s = crop_side(*a.shape, deg)
            per.append(ssim(rotate_crop(a, deg, s), rotate_crop(b, deg, s)))
        adfs.append(float(np.mean(per)))
    mcr = {}
    for lv in LEVELS:
        hits = 0
        for a, b in zip(gen, gt):
            da, db = downsample(a, lv), downsample(b, lv)
            hits += np.abs(da - db).sum() / np.abs(db).sum() < TAU
        mcr[str(lv)] = 100.0 * hits / len(gen)
    report = {
        "seed": SEED,
        "tau": TAU,
        "levels": list(LEVELS),
        "angles": list(ANGLES),
        "window": WINDOW,
        "ssim_per_texture": ssims,
        "ssim": float(np.mean(ssims)),
        "adf_per_texture": adfs,
        "adf": float(np.mean(adfs)),
        "mcr_levels": mcr,
        "mcr_mean": float(np.mean(list(mcr.values()))),
        "frechet_distance": frechet(fgen, fgt),
    }
    with open(os.path.join(out_dir, "metrics_expected.json"), "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    if len(sys.argv) != 3 or sys.argv[1] not in ("generate", "expected"):
        sys.exit(__doc__)
    (generate if sys.argv[1] == "generate" else expected)(sys.argv[2])
