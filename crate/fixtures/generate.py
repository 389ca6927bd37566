#!/usr/bin/env python3
"""Writes the JSON fixtures used by the CLI tests, plus expected.json with
closed-form values. Standard library only; rerun to regenerate."""

import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent


def diag(*xs):
    n = len(xs)
    return [[[xs[i] if i == j else 0.0, 0.0] for j in range(n)] for i in range(n)]


def real(rows):
    return [[[x, 0.0] for x in row] for row in rows]


def dump(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=1) + "\n")


def kl(p, q):
    return sum(a * math.log2(a / b) for a, b in zip(p, q) if a > 0)


def main():
    zero = diag(1.0, 0.0)
    mixed = diag(0.5, 0.5)
    plus = real([[0.5, 0.5], [0.5, 0.5]])

    dump("zero_vs_mixed.json", {"rho": zero, "sigma": mixed})
    dump("plus_vs_mixed.json", {"rho": plus, "sigma": mixed})
    dump("mixed_vs_zero.json", {"rho": mixed, "sigma": zero})
    dump("benchmark_src.json", {"rho": diag(0.9, 0.1), "sigma": mixed})
    dump("benchmark_dst.json", {"rho": diag(0.75, 0.25), "sigma": mixed})
    dump("steep_dst.json", {"rho": diag(0.999, 0.001), "sigma": diag(0.001, 0.999)})
    dump(
        "full_rank.json",
        {
            "rho": real([[0.7, 0.2], [0.2, 0.3]]),
            "sigma": [[[0.4, 0.0], [0.0, 0.1]], [[0.0, -0.1], [0.6, 0.0]]],
        },
    )
    dump("plus.json", plus)
    dump("mixed.json", mixed)
    dump("hamiltonian.json", diag(0.0, 1.0))
    dump("ground.json", diag(1.0, 0.0))
    dump("excited.json", diag(0.0, 1.0))
    z = 1.0 + math.exp(-1.0)
    dump("gibbs_beta1.json", diag(1.0 / z, math.exp(-1.0) / z))

    expected = {
        "zero_vs_mixed": {"relent": 1.0, "dmax": 1.0, "dmin": 1.0, "var": 0.0},
        "plus_vs_mixed": {"relent": 1.0, "dmax": 1.0},
        "benchmark_src_relent": kl([0.9, 0.1], [0.5, 0.5]),
        "benchmark_dst_relent": kl([0.75, 0.25], [0.5, 0.5]),
        "benchmark_critical_rate": kl([0.9, 0.1], [0.5, 0.5]) / kl([0.75, 0.25], [0.5, 0.5]),
        "plus_coherence": 1.0,
        "gibbs_beta1_free_energy": -math.log2(z),
        "ground_free_energy_beta1": 0.0,
        "excited_free_energy_beta1": math.log2(math.e),
    }
    dump("expected.json", expected)


if __name__ == "__main__":
    main()
