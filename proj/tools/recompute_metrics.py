#!/usr/bin/env python3
"""Recompute restoration metrics from stored arrays and compare with a result.

    tools/recompute_metrics.py SEED_DIR [--mode gibbsddrm] [--rtol 1e-9]

SEED_DIR holds manifest.json, the ground truth and the files written by
`gibbsddrm restore`. Written without the C++ code: NumPy for the arithmetic,
plain parsing for CSV and PGM. Exit status 1 if any metric disagrees.
"""

import argparse
import json
import math
import pathlib
import sys

import numpy as np


def read_csv(path):
    return np.array([float(line) for line in path.read_text().split()], dtype=float)


def read_pgm(path):
    data = path.read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode())
        pos = end
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5" or maxval != 255:
        raise ValueError(f"{path}: expected binary 8-bit PGM")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    return pixels.astype(float) / 255.0


def psnr(mse, data_range):
    return math.inf if mse == 0 else 10 * math.log10(data_range**2 / mse)


def metrics(x_ref, x_est, phi_ref, phi_est, data_range, height, width, kh, kw):
    mse = float(np.mean((x_ref - x_est) ** 2))

    def pad(k):
        grid = np.zeros((height, width))
        grid[:kh, :kw] = k.reshape(kh, kw)
        return grid

    ref, est = pad(phi_ref), pad(phi_est)
    best = (math.inf, 0, 0)
    for dr in range(height):
        for dc in range(width):
            err = float(np.linalg.norm(np.roll(est, (dr, dc), axis=(0, 1)) - ref))
            if err < best[0]:
                best = (err, dr, dc)
    err, dr, dc = best
    aligned = np.roll(x_est.reshape(height, width), (-dr, -dc), axis=(0, 1)).ravel()
    mse_aligned = float(np.mean((x_ref - aligned) ** 2))
    return {
        "mse": mse,
        "psnr_db": psnr(mse, data_range),
        "kernel_error_l2_normalized": err / float(np.linalg.norm(phi_ref)),
        "kernel_shift": [dr, dc],
        "mse_aligned": mse_aligned,
        "psnr_aligned_db": psnr(mse_aligned, data_range),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("seed_dir", type=pathlib.Path)
    parser.add_argument("--mode", default="gibbsddrm")
    parser.add_argument("--rtol", type=float, default=1e-9)
    args = parser.parse_args()

    d = args.seed_dir
    manifest = json.loads((d / "manifest.json").read_text())
    result = json.loads((d / f"result_{args.mode}.json").read_text())
    if result["status"] != "ok":
        print(f"run failed: {result['failure']}")
        return 1
    op = manifest["operator"]
    signal = d / manifest["files"]["signal"]
    x_ref = read_pgm(signal) if signal.suffix == ".pgm" else read_csv(signal)
    got = metrics(
        x_ref,
        read_csv(d / result["arrays"]["x0"]),
        read_csv(d / manifest["files"]["kernel"]),
        read_csv(d / result["arrays"]["phi"]),
        manifest["data_range"],
        op["height"], op["width"], op["kernel_h"], op["kernel_w"],
    )

    stored = result["metrics"]
    bad = 0
    for key, value in got.items():
        want = stored[key]
        if key.startswith("psnr") and math.isinf(value):
            ok = want is None and stored[key.replace("_db", "_infinite")]
        elif key == "kernel_shift":
            ok = list(want) == value
        else:
            ok = math.isclose(value, want, rel_tol=args.rtol, abs_tol=1e-300)
        bad += not ok
        print(f"{'ok ' if ok else 'BAD'} {key}: recomputed {value}, stored {want}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
