#!/usr/bin/env python3
# Copyright 2026 The Hybridize Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes tests/oracle_values.h: frozen expected values for the unit tests.

Everything here is computed independently of the C++ library: kernels and
losses are evaluated term by term with mpmath at 50 significant digits, the
random generator is re-implemented from its bit-level definition, and FLOP
totals come from walking the kernel loops and tallying operations.

Run from the repository root:  python3 tests/oracle/generate.py
"""

import math
import pathlib

import mpmath as mp

mp.mp.dps = 50
MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


# ---------------------------------------------------------------- rng ----
def finalize(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class SplitMix:
    def __init__(self, seed):
        self.state = seed & MASK

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK
        return finalize(self.state)

    def uniform(self):
        return (self.next_u64() >> 11) * 2.0 ** -53

    def normal(self):
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def gaussian(self, rows, cols):
        return [[self.normal() for _ in range(cols)] for _ in range(rows)]


def mix_seed(seed, salt):
    return finalize((seed + GOLDEN * (salt + 1)) & MASK)


# ------------------------------------------------------------ helpers ----
def mpm(a):
    return [[mp.mpf(x) for x in row] for row in a]


def mm(a, b):
    return [[mp.fsum(a[i][p] * b[p][j] for p in range(len(b)))
             for j in range(len(b[0]))] for i in range(len(a))]


def dot(x, y):
    return mp.fsum(p * q for p, q in zip(x, y))


def silu(z):
    return z / (1 + mp.exp(-z))


def softplus(z):
    return mp.log(1 + mp.exp(z))


def feature_map(layers, degree, slice_width, u):
    """layers: list of (W in x out, b out). Returns rows of phi(u)."""
    out = []
    for row in u:
        h = list(row)
        for li, (w, b) in enumerate(layers):
            z = [mp.fsum(h[p] * w[p][j] for p in range(len(h))) + b[j]
                 for j in range(len(b))]
            h = [silu(x) for x in z] if li + 1 < len(layers) else z
        a = [softplus(x) for x in h]
        out.append([a[c] ** (c // slice_width + 1) for c in range(len(a))])
    return out


def softmax_head(q, k, v):
    d = len(q[0])
    out = []
    for qi in q:
        w = [mp.exp(dot(qi, kj) / mp.sqrt(d)) for kj in k]
        s = mp.fsum(w)
        out.append([mp.fsum(w[j] * v[j][m] for j in range(len(v))) / s
                    for m in range(len(v[0]))])
    return out


def linear_head(fq, fk, v):
    out = []
    for fi in fq:
        w = [dot(fi, fj) for fj in fk]
        s = mp.fsum(w)
        out.append([mp.fsum(w[j] * v[j][m] for j in range(len(v))) / s
                    for m in range(len(v[0]))])
    return out


def hybrid_head(q, k, v, fq, fk, rate, consistent):
    n, d = len(q), len(q[0])
    soft = [j for j in range(n) if j % rate == 0]
    lin = [j for j in range(n) if j % rate != 0]
    out = []
    for i in range(n):
        a = {j: dot(q[i], k[j]) / mp.sqrt(d) for j in soft}
        c = max(a.values())
        gain = mp.exp(-c) if consistent else mp.mpf(1)
        w = {j: mp.exp(a[j] - c) for j in soft}
        for j in lin:
            w[j] = gain * dot(fq[i], fk[j])
        s = mp.fsum(w.values())
        out.append([mp.fsum(w[j] * v[j][m] for j in w) / s
                    for m in range(len(v[0]))])
    return out


def loss_vd(a, b):
    flat = [abs(x - y) for ra, rb in zip(a, b) for x, y in zip(ra, rb)]
    return mp.fsum(flat) / len(flat)


def loss_ad(qs, ks, fqs, fks):
    terms = []
    for q, k, fq, fk in zip(qs, ks, fqs, fks):
        d = len(q[0])
        for i in range(len(q)):
            for j in range(len(k)):
                a = dot(q[i], k[j]) / mp.sqrt(d)
                a = min(max(a, mp.mpf(-30)), mp.mpf(30))
                terms.append((mp.exp(a) - dot(fq[i], fk[j])) ** 2)
    return mp.log(1 + mp.fsum(terms) / len(terms))


# --------------------------------------------------------- op counting ----
def count_feature_map(d, hidden, e, depth):
    ops = 0
    widths = [d] + [hidden] * (depth - 1) + [e]
    for l in range(depth):
        for _ in range(widths[l + 1]):        # output units
            for _ in range(widths[l]):         # multiply-add per input
                ops += 2
            if l + 1 < depth:
                ops += 1                       # SiLU
    ops += e                                   # softplus
    ops += e                                   # powers
    return ops


def count_attention(kind, n, d, m, heads, degree, slice_width, depth,
                    hidden, rate=1):
    e = degree * slice_width
    phi = count_feature_map(d, hidden, e, depth)
    if kind == "hybrid" and rate == 1:
        kind = "softmax"
    if kind == "softmax":
        soft_keys, lin_keys, phi_queries = n, 0, False
    elif kind == "linear":
        soft_keys, lin_keys, phi_queries = 0, n, True
    else:
        soft_keys = len([j for j in range(n) if j % rate == 0])
        lin_keys, phi_queries = n - soft_keys, True
    ops = 0
    # Softmax scores over the exact keys: per (query, key) pair.
    pair = 2 * d + 5 + 2 * m
    for _ in range(n):
        ops += pair * soft_keys
    if phi_queries:
        for _ in range(n):
            ops += phi                          # phi on the query
        for _ in range(lin_keys):
            ops += phi                          # phi on the key
            ops += 2 * e * m                    # kv aggregate
            ops += e                            # key-sum aggregate
        for _ in range(n):
            ops += 2 * e * m                    # phi_q . kv
            ops += 2 * e                        # phi_q . ksum
            ops += 2 * m                        # combine and normalize
    return ops * heads


# ------------------------------------------------------------ fixtures ----
def fixtures():
    vals = {}

    r0, r7 = SplitMix(0), SplitMix(7)
    vals["kRngSeed0"] = ("u64", [r0.next_u64() for _ in range(4)])
    vals["kRngSeed7"] = ("u64", [r7.next_u64() for _ in range(4)])
    vals["kMixSeed"] = ("u64", [mix_seed(0, 0), mix_seed(42, 7),
                                mix_seed(MASK, 3)])
    r = SplitMix(7)
    vals["kNormalSeed7"] = ("f64", [r.normal() for _ in range(4)])

    # matmul: a = gaussian(rng 7, 4x3), b = gaussian(same rng, 3x2)
    r = SplitMix(7)
    a = r.gaussian(4, 3)
    b = r.gaussian(3, 2)
    vals["kMatmulA"] = ("f64", sum(a, []))
    vals["kMatmulB"] = ("f64", sum(b, []))
    vals["kMatmulAB"] = ("f64", sum(mm(mpm(a), mpm(b)), []))

    row = [0.3, -1.2, 2.5, 7.0, -3.3]
    mrow = [mp.mpf(x) for x in row]
    mx = max(mrow)
    ex = [mp.exp(x - mx) for x in mrow]
    s = mp.fsum(ex)
    vals["kSoftmaxRow"] = ("f64", row)
    vals["kSoftmaxRowExpected"] = ("f64", [x / s for x in ex])

    # projections: F=4, H=2, D=M=1
    x = [[0.5, -1.0, 2.0, 0.25], [1.5, 0.0, -0.5, 1.0], [-2.0, 0.75, 0.1, -0.3]]
    wq = [[0.2, -0.1], [0.4, 0.3], [-0.5, 0.6], [0.1, 0.05]]
    wk = [[-0.3, 0.2], [0.1, -0.4], [0.25, 0.15], [0.7, -0.2]]
    wv = [[0.6, 0.1], [-0.2, 0.5], [0.3, -0.3], [0.05, 0.9]]
    vals["kProjX"] = ("f64", sum(x, []))
    vals["kProjWq"] = ("f64", sum(wq, []))
    vals["kProjWk"] = ("f64", sum(wk, []))
    vals["kProjWv"] = ("f64", sum(wv, []))
    for name, w in (("Q", wq), ("K", wk), ("V", wv)):
        vals["kProj" + name] = ("f64", sum(mm(mpm(x), mpm(w)), []))

    # feature maps: D=2 -> hidden 3 -> P*D' = 2*2
    phi_q = ([[0.3, -0.2, 0.5], [0.1, 0.4, -0.3]], [0.05, -0.1, 0.2],
             [[0.2, -0.1, 0.3, 0.4], [-0.5, 0.2, 0.1, -0.2], [0.3, 0.3, -0.4, 0.1]],
             [0.1, 0.0, -0.2, 0.3])
    phi_k = ([[-0.4, 0.2, 0.1], [0.3, -0.1, 0.6]], [0.0, 0.2, -0.1],
             [[0.1, 0.5, -0.2, 0.3], [0.2, -0.3, 0.4, 0.1], [-0.1, 0.2, 0.3, -0.5]],
             [-0.1, 0.2, 0.0, 0.1])
    for tag, (w1, b1, w2, b2) in (("PhiQ", phi_q), ("PhiK", phi_k)):
        vals["k%sW1" % tag] = ("f64", sum(w1, []))
        vals["k%sB1" % tag] = ("f64", b1)
        vals["k%sW2" % tag] = ("f64", sum(w2, []))
        vals["k%sB2" % tag] = ("f64", b2)

    def layers(p):
        w1, b1, w2, b2 = p
        return [(mpm(w1), [mp.mpf(v) for v in b1]),
                (mpm(w2), [mp.mpf(v) for v in b2])]

    u = [[0.5, -1.0], [1.2, 0.3], [-0.7, 2.0]]
    vals["kPhiInput"] = ("f64", sum(u, []))
    vals["kPhiQOutput"] = ("f64", sum(feature_map(layers(phi_q), 2, 2, mpm(u)), []))

    # softmax kernel, N=4, D=M=2
    q4 = [[0.5, -0.3], [1.2, 0.8], [-0.6, 0.1], [0.0, 1.5]]
    k4 = [[0.9, 0.2], [-1.1, 0.4], [0.3, -0.7], [0.6, 1.0]]
    v4 = [[1.0, -2.0], [0.5, 0.5], [-1.5, 2.5], [3.0, 0.0]]
    vals["kSoftQ"] = ("f64", sum(q4, []))
    vals["kSoftK"] = ("f64", sum(k4, []))
    vals["kSoftV"] = ("f64", sum(v4, []))
    vals["kSoftOut"] = ("f64", sum(softmax_head(mpm(q4), mpm(k4), mpm(v4)), []))

    # linear kernel, N=5
    q5 = [[0.4, -0.2], [1.0, 0.6], [-0.8, 0.3], [0.2, 1.1], [-0.5, -0.9]]
    k5 = [[0.7, 0.1], [-0.3, 0.9], [0.5, -0.6], [1.2, 0.4], [-1.0, 0.2]]
    v5 = [[1.0, 0.0], [0.0, 1.0], [2.0, -1.0], [-1.0, 3.0], [0.5, 0.5]]
    vals["kLinQ"] = ("f64", sum(q5, []))
    vals["kLinK"] = ("f64", sum(k5, []))
    vals["kLinV"] = ("f64", sum(v5, []))
    fq5 = feature_map(layers(phi_q), 2, 2, mpm(q5))
    fk5 = feature_map(layers(phi_k), 2, 2, mpm(k5))
    vals["kLinOut"] = ("f64", sum(linear_head(fq5, fk5, mpm(v5)), []))

    # hybrid kernel, N=6, R=2
    q6 = [[0.9, -0.4], [0.3, 1.2], [-1.1, 0.5], [0.6, 0.6], [2.0, -1.0], [-0.2, -0.7]]
    k6 = [[0.5, 0.8], [-0.9, 0.1], [1.3, -0.2], [0.0, 0.4], [-0.6, -1.2], [0.8, 0.9]]
    v6 = [[1.0, 2.0], [-1.0, 0.5], [0.3, -0.8], [2.2, 1.1], [-0.4, 0.0], [0.9, -1.5]]
    vals["kHybQ"] = ("f64", sum(q6, []))
    vals["kHybK"] = ("f64", sum(k6, []))
    vals["kHybV"] = ("f64", sum(v6, []))
    fq6 = feature_map(layers(phi_q), 2, 2, mpm(q6))
    fk6 = feature_map(layers(phi_k), 2, 2, mpm(k6))
    vals["kHybLiteralOut"] = ("f64", sum(hybrid_head(mpm(q6), mpm(k6), mpm(v6),
                                                     fq6, fk6, 2, False), []))
    vals["kHybConsistentOut"] = ("f64", sum(hybrid_head(mpm(q6), mpm(k6), mpm(v6),
                                                        fq6, fk6, 2, True), []))

    # value-distillation loss
    la = [[0.5, -1.0, 2.0], [0.0, 3.5, -0.25]]
    lb = [[0.25, -0.5, 2.5], [1.0, 3.0, 0.75]]
    vals["kLvdA"] = ("f64", sum(la, []))
    vals["kLvdB"] = ("f64", sum(lb, []))
    vals["kLvd"] = ("f64", [loss_vd(mpm(la), mpm(lb))])

    # attention-distillation loss: two heads, N=3, D=2, E=4
    qa = [[[0.5, -0.2], [1.0, 0.3], [-0.4, 0.8]], [[0.2, 0.2], [-1.0, 0.5], [0.7, -0.6]]]
    ka = [[[0.3, 0.9], [-0.5, 0.1], [0.6, -0.4]], [[1.1, 0.0], [0.2, -0.3], [-0.8, 0.4]]]
    fqa = [[[0.5, 0.2, 0.3, 0.1], [0.9, 0.1, 0.4, 0.2], [0.2, 0.6, 0.05, 0.3]],
           [[0.4, 0.4, 0.2, 0.2], [0.1, 0.3, 0.6, 0.1], [0.7, 0.2, 0.1, 0.5]]]
    fka = [[[0.6, 0.3, 0.2, 0.4], [0.2, 0.5, 0.1, 0.1], [0.8, 0.1, 0.3, 0.2]],
           [[0.3, 0.3, 0.5, 0.1], [0.9, 0.2, 0.2, 0.4], [0.1, 0.7, 0.3, 0.3]]]
    for name, t in (("kLadQ", qa), ("kLadK", ka), ("kLadPhiQ", fqa), ("kLadPhiK", fka)):
        vals[name] = ("f64", [x for head in t for row in head for x in row])
    vals["kLad"] = ("f64", [loss_ad([mpm(h) for h in qa], [mpm(h) for h in ka],
                                    [mpm(h) for h in fqa], [mpm(h) for h in fka])])

    # AdamW, two steps
    theta = [0.5, -1.0, 2.0]
    g1 = [0.1, -0.2, 0.3]
    g2 = [-0.05, 0.4, 0.0]
    lr, b1, b2, eps, wd = mp.mpf("1e-3"), mp.mpf("0.9"), mp.mpf("0.999"), mp.mpf("1e-8"), mp.mpf("0.01")
    th = [mp.mpf(v) for v in theta]
    mo = [mp.mpf(0)] * 3
    ve = [mp.mpf(0)] * 3
    steps = []
    for t, g in enumerate((g1, g2), start=1):
        g = [mp.mpf(v) for v in g]
        mo = [b1 * a + (1 - b1) * c for a, c in zip(mo, g)]
        ve = [b2 * a + (1 - b2) * c * c for a, c in zip(ve, g)]
        mh = [a / (1 - b1 ** t) for a in mo]
        vh = [a / (1 - b2 ** t) for a in ve]
        th = [p * (1 - lr * wd) - lr * a / (mp.sqrt(c) + eps)
              for p, a, c in zip(th, mh, vh)]
        steps.append(list(th))
    vals["kAdamTheta"] = ("f64", theta)
    vals["kAdamGrad1"] = ("f64", g1)
    vals["kAdamGrad2"] = ("f64", g2)
    vals["kAdamStep1"] = ("f64", steps[0])
    vals["kAdamStep2"] = ("f64", steps[1])

    # FLOPs at N=1024, D=M=64, H=8, P=2, D'=64, depth 2, hidden P*D'
    args = dict(n=1024, d=64, m=64, heads=8, degree=2, slice_width=64,
                depth=2, hidden=128)
    vals["kFlopsSoftmax"] = ("f64", [count_attention("softmax", **args)])
    vals["kFlopsLinear"] = ("f64", [count_attention("linear", **args)])
    vals["kFlopsHybrid"] = ("f64", [count_attention("hybrid", rate=r, **args)
                                    for r in (1, 2, 4, 8)])
    return vals


LICENSE_HEADER = [
    "// Copyright 2026 The Hybridize Authors",
    "// SPDX-License-Identifier: Apache-2.0",
    "//",
    '// Licensed under the Apache License, Version 2.0 (the "License");',
    "// you may not use this file except in compliance with the License.",
    "// You may obtain a copy of the License at",
    "//",
    "//     http://www.apache.org/licenses/LICENSE-2.0",
    "//",
    "// Unless required by applicable law or agreed to in writing, software",
    '// distributed under the License is distributed on an "AS IS" BASIS,',
    "// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.",
    "// See the License for the specific language governing permissions and",
    "// limitations under the License.",
    "",
]


def emit(vals):
    lines = LICENSE_HEADER + [
        "// Generated by tests/oracle/generate.py. Do not edit by hand.",
        "#ifndef HYBRIDIZE_TESTS_ORACLE_VALUES_H_",
        "#define HYBRIDIZE_TESTS_ORACLE_VALUES_H_",
        "",
        "#include <array>",
        "#include <cstdint>",
        "",
        "namespace hybridize::oracle {",
        "",
    ]
    for name, (kind, data) in vals.items():
        if kind == "u64":
            body = ", ".join("0x%016XULL" % v for v in data)
            ctype = "std::uint64_t"
        else:
            body = ", ".join(mp.nstr(mp.mpf(v), 17, min_fixed=-5, max_fixed=5)
                             if not isinstance(v, int) else "%d.0" % v
                             for v in data)
            ctype = "double"
        lines.append("inline constexpr std::array<%s, %d> %s = {%s};"
                     % (ctype, len(data), name, body))
    lines += ["", "}  // namespace hybridize::oracle", "",
              "#endif  // HYBRIDIZE_TESTS_ORACLE_VALUES_H_", ""]
    return "\n".join(lines)


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "oracle_values.h"
    out.write_text(emit(fixtures()))
    print("wrote", out)
