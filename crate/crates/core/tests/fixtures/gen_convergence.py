#!/usr/bin/env python3
"""Regenerate convergence_default.csv.

    python3 crates/core/tests/fixtures/gen_convergence.py > crates/core/tests/fixtures/convergence_default.csv

Independent of the Rust code: evaluates H(theta) = pi*theta/4 - eps*(1 - cos theta)
directly and takes diam = d_N / (d_N - d_{N-1}) with d_s = sqrt(H(2 pi s / m)).
The tolerance column is what the Rust table must match (relative); the
deviation columns are the observed finite-m distances from the limit.
"""
import math

EPS = 0.125
LIMIT = 1 - 8 * EPS / math.pi ** 2
QS = [4, 8, 16, 32, 64, 128]


def h(theta):
    return math.pi * theta / 4 - EPS * (1 - math.cos(theta))


def row(q):
    m = q * q + q + 1
    n = q + 1
    half = (m - 1) // 2
    d_n = math.sqrt(h(2 * math.pi * half / m))
    d_prev = math.sqrt(h(2 * math.pi * (half - 1) / m))
    diam = d_n / (d_n - d_prev)
    return m, n, diam / m, diam / (n * n)


print("# " + "python3 crates/core/tests/fixtures/gen_convergence.py")
print(f"# limit={LIMIT!r} epsilon={EPS!r}")
print("q,m,n,diam_over_m,diam_over_n2,deviation,deviation_n2,rel_tolerance")
for q in QS:
    m, n, a, b = row(q)
    # the gap d_N - d_{N-1} loses about log10(m) digits to cancellation
    tol = 1e-13 * m
    print(f"{q},{m},{n},{a!r},{b!r},{abs(a - LIMIT)!r},{abs(b - LIMIT)!r},{tol!r}")
