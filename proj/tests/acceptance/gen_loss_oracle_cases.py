#!/usr/bin/env python3
"""Regenerates loss_oracle_cases.inc.

Independent high-precision reference for the adaptation loss math. Inputs are
drawn as IEEE doubles, evaluated with mpmath at 50 significant digits, and the
reference value is rounded back to the nearest double. The emitted doubles use
repr(), which round-trips exactly through strtod, so the C++ side computes on
bit-identical inputs.

Case row layouts (flat double arrays, one cursor-walked row per case):
  entropy:   [k, p_0..p_{k-1}]
  skl:       [k, p_0..p_{k-1}, q_0..q_{k-1}]
  ps:        [K, C, anchor, probs row-major K*C]
  se_ignore / se_maximize: [K, C, anchor, probs row-major K*C]
  gskl:      [mu1, sigma1, muk, sigmak]
  gentropy:  [sigma]
"""

import random

from mpmath import mp, mpf, log, pi, e as mp_e

mp.dps = 50

CASES = 1000
FLOOR = mpf(1e-7)  # exact binary value of the double 1e-7


def simplex(rng, k):
    exps = [rng.gauss(0.0, 2.0) for _ in range(k)]
    import math

    raw = [math.exp(v) for v in exps]
    s = math.fsum(raw)
    return [v / s for v in raw]


def ref_entropy(p):
    h = mpf(0)
    for v in p:
        mv = mpf(v)
        if mv > 0:
            h -= mv * log(mv)
    return h


def ref_skl(p, q):
    s = mpf(0)
    for pv, qv in zip(p, q):
        mp_p, mp_q = mpf(pv), mpf(qv)
        if mp_p > 0:
            s += mp_p * log(mp_p / max(mp_q, FLOOR))
        if mp_q > 0:
            s += mp_q * log(mp_q / max(mp_p, FLOOR))
    return s


def ref_ps(rows, anchor):
    s = mpf(0)
    for k, row in enumerate(rows):
        if k != anchor:
            s += ref_skl(rows[anchor], row)
    return s / 2


def vote(rows, anchor):
    votes = [row.index(max(row)) for row in rows]
    others = [v for i, v in enumerate(votes) if i != anchor]
    majority = -1
    for cand in others:
        if 2 * others.count(cand) > len(others):
            majority = cand
            break
    return majority >= 0 and votes[anchor] == majority


def ref_se(rows, anchor, maximize):
    h = ref_entropy(rows[anchor])
    if vote(rows, anchor):
        return h
    return -h if maximize else mpf(0)


def ref_gskl(mu1, s1, muk, sk):
    a, b = mpf(s1) ** 2, mpf(sk) ** 2
    d = mpf(mu1) - mpf(muk)
    return (a * a + b * b + (a + b) * d * d) / (2 * a * b)


def ref_gentropy(sigma):
    return log(mpf(sigma)) + log(2 * pi * mp_e) / 2


def sprinkle(rng, p):
    """Zero some entries or push them toward the clamp floor, no renormalize."""
    p = list(p)
    roll = rng.random()
    if roll < 0.15:
        for i in rng.sample(range(len(p)), rng.randint(1, max(1, len(p) // 2))):
            p[i] = 0.0
    elif roll < 0.35:
        import math

        for i in rng.sample(range(len(p)), rng.randint(1, max(1, len(p) // 2))):
            p[i] = math.exp(rng.uniform(math.log(1e-8), math.log(1e-6)))
    return p


def gen_entropy(rng):
    data, want = [], []
    for _ in range(CASES):
        k = rng.randint(2, 8)
        p = sprinkle(rng, simplex(rng, k))
        data.append([float(k)] + p)
        want.append(float(ref_entropy(p)))
    return data, want


def gen_skl(rng):
    data, want = [], []
    for _ in range(CASES):
        k = rng.randint(2, 8)
        p = sprinkle(rng, simplex(rng, k))
        q = sprinkle(rng, simplex(rng, k))
        data.append([float(k)] + p + q)
        want.append(float(ref_skl(p, q)))
    return data, want


def prob_matrix(rng, big_k, c, aligned):
    rows = []
    boost = rng.randrange(c)
    for _ in range(big_k):
        row = simplex(rng, c)
        if aligned:
            # Tilt every slice toward one class so consistent votes occur.
            row = list(row)
            row[boost] += 1.0
            s = sum(row)
            row = [v / s for v in row]
        rows.append(row)
    return rows


def gen_ps(rng):
    data, want = [], []
    for _ in range(CASES):
        big_k, c = rng.randint(2, 4), rng.randint(2, 5)
        rows = prob_matrix(rng, big_k, c, rng.random() < 0.3)
        rows = [sprinkle(rng, row) for row in rows]
        anchor = rng.randrange(big_k)
        flat = [v for row in rows for v in row]
        data.append([float(big_k), float(c), float(anchor)] + flat)
        want.append(float(ref_ps(rows, anchor)))
    return data, want


def gen_se(rng, maximize):
    data, want = [], []
    for _ in range(CASES):
        big_k, c = rng.randint(2, 4), rng.randint(2, 5)
        rows = prob_matrix(rng, big_k, c, rng.random() < 0.5)
        anchor = rng.randrange(big_k)
        flat = [v for row in rows for v in row]
        data.append([float(big_k), float(c), float(anchor)] + flat)
        want.append(float(ref_se(rows, anchor, maximize)))
    return data, want


def gen_gskl(rng):
    import math

    data, want = [], []
    for i in range(CASES):
        mu1 = rng.uniform(-3.0, 3.0)
        s1 = math.exp(rng.uniform(math.log(0.05), math.log(20.0)))
        if i % 50 == 0:
            muk, sk = mu1, s1  # identity pairs must map to exactly 1
        else:
            muk = rng.uniform(-3.0, 3.0)
            sk = math.exp(rng.uniform(math.log(0.05), math.log(20.0)))
        data.append([mu1, s1, muk, sk])
        want.append(float(ref_gskl(mu1, s1, muk, sk)))
    return data, want


def gen_gentropy(rng):
    import math

    data, want = [], []
    for _ in range(CASES):
        sigma = math.exp(rng.uniform(math.log(1e-3), math.log(1e3)))
        data.append([sigma])
        want.append(float(ref_gentropy(sigma)))
    return data, want


def emit_array(out, name, values):
    out.write(f"inline const double {name}[] = {{\n")
    line = []
    for v in values:
        line.append(repr(v))
        if len(line) == 8:
            out.write("    " + ", ".join(line) + ",\n")
            line = []
    if line:
        out.write("    " + ", ".join(line) + ",\n")
    out.write("};\n")


def main():
    families = [
        ("entropy", gen_entropy(random.Random(0xE57201))),
        ("skl", gen_skl(random.Random(0xE57202))),
        ("ps", gen_ps(random.Random(0xE57203))),
        ("se_ignore", gen_se(random.Random(0xE57204), False)),
        ("se_maximize", gen_se(random.Random(0xE57205), True)),
        ("gskl", gen_gskl(random.Random(0xE57206))),
        ("gentropy", gen_gentropy(random.Random(0xE57207))),
    ]
    with open("loss_oracle_cases.inc", "w") as out:
        out.write("// Generated by gen_loss_oracle_cases.py; do not edit.\n")
        out.write("#pragma once\n\nnamespace oracle_cases {\n\n")
        out.write(f"inline constexpr int case_count = {CASES};\n\n")
        for name, (data, want) in families:
            flat = [v for row in data for v in row]
            emit_array(out, f"{name}_data", flat)
            emit_array(out, f"{name}_want", want)
            out.write("\n")
        out.write("} // namespace oracle_cases\n")


if __name__ == "__main__":
    main()
