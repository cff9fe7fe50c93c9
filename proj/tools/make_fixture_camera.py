#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Generate the K=4 Kannala-Brandt fixture camera used by the benchmarks.

The radial polynomial is r(t) = k1 (t + a t^3 + b t^5 + c t^7). The shape
terms b and c are fixed; k1 and a are solved so that the image circle has the
requested radius and the center/periphery angular-extent ratio (1 px offset,
periphery starting at 0.9 r_max) equals the target.
"""
import argparse
import json

import numpy as np
from scipy.optimize import brentq


def radius(coeffs, t):
    return sum(k * t ** (2 * j + 1) for j, k in enumerate(coeffs))


def invert(coeffs, r, t_max):
    if r <= 0.0:
        return 0.0
    return brentq(lambda t: radius(coeffs, t) - r, 0.0, t_max, xtol=1e-15)


def extent_ratio(coeffs, t_max, offset=1.0):
    r_max = radius(coeffs, t_max)
    center = invert(coeffs, offset, t_max)
    r0 = 0.9 * r_max
    periphery = invert(coeffs, r0 + offset, t_max) - invert(coeffs, r0, t_max)
    return center / periphery


def make(a, b, c, t_max, r_max):
    shape = [1.0, a, b, c]
    k1 = r_max / radius(shape, t_max)
    return [k1 * s for s in shape]


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--theta-max", type=float, default=np.deg2rad(95.0))
    p.add_argument("--r-max", type=float, default=500.0)
    p.add_argument("--ratio", type=float, default=4.0)
    p.add_argument("--b", type=float, default=-0.02)
    p.add_argument("--c", type=float, default=0.004)
    p.add_argument("--size", type=int, default=1024)
    args = p.parse_args()

    a = brentq(
        lambda a: extent_ratio(make(a, args.b, args.c, args.theta_max, args.r_max), args.theta_max)
        - args.ratio,
        0.0,
        5.0,
    )
    coeffs = make(a, args.b, args.c, args.theta_max, args.r_max)
    t = np.linspace(0.0, args.theta_max, 4096)
    deriv = sum((2 * j + 1) * k * t ** (2 * j) for j, k in enumerate(coeffs))
    assert np.all(deriv > 0.0), "fixture polynomial is not monotone"

    calib = {
        "model": "kannala_brandt",
        "coeffs": [float(repr_k) for repr_k in coeffs],
        "principal_point": [args.size / 2.0, args.size / 2.0],
        "theta_max": args.theta_max,
        "image_size": [args.size, args.size],
    }
    print(json.dumps(calib, indent=2))
    print("# ratio", extent_ratio(coeffs, args.theta_max), file=__import__("sys").stderr)


if __name__ == "__main__":
    main()
