#!/usr/bin/env python3
"""Time the Poisson dissimilarity matrix on an n=50, p=10,000 dataset.

The single-threaded run must finish within 14 seconds on a desktop core,
and threaded runs must reproduce the serial result bit for bit.
"""

import argparse
import time

import numpy as np

from poiskit.dissimilarity import poisson_dissimilarity_matrix
from poiskit.simulate import SimulationConfig, simulate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50)
    parser.add_argument("--p", type=int, default=10_000)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    dataset = simulate(
        SimulationConfig(n=args.n, p=args.p, K=3, phi=0.01, sigma=0.1, seed=args.seed)
    )
    matrix = dataset.data.matrix

    started = time.perf_counter()
    serial = poisson_dissimilarity_matrix(matrix, transform=True, threads=1)
    serial_time = time.perf_counter() - started

    started = time.perf_counter()
    threaded = poisson_dissimilarity_matrix(matrix, transform=True, threads=args.threads)
    threaded_time = time.perf_counter() - started

    identical = np.array_equal(serial.condensed, threaded.condensed)
    ok = serial_time <= 14.0 and identical
    print(f"serial: {serial_time:.2f} s, {args.threads} threads: {threaded_time:.2f} s")
    print(f"bit-identical: {identical}; 14 s budget -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
