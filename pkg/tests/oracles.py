"""Independent reference computations shared by the unit and acceptance tests.

Everything here is written with plain loops or dense textbook formulas so it
shares no code path with the library.
"""

import math

import numpy as np


def gauss(a, b, bw):
    return math.exp(-sum((a[k] - b[k]) ** 2 for k in range(len(a))) / bw)


def q_delta_rhs(xs, ys, w, delta, markov_bw):
    """Double-sum quadrature of the extended kernel q(x, x', y) = (p * g)(x, x')."""
    n = len(xs)
    p_norm = [sum(w[j] * gauss(xs[i], xs[j], markov_bw) for j in range(n)) for i in range(n)]
    g_norm = [sum(w[j] * gauss(xs[i], xs[j], delta) for j in range(n)) for i in range(n)]
    out = []
    for i in range(n):
        total = 0.0
        for jp in range(n):
            # q(x_i, x'_jp) = sum_z w_z p(x_i, z) g(z, x'_jp)
            q = 0.0
            for z in range(n):
                q += w[z] * gauss(xs[i], xs[z], markov_bw) / p_norm[i] * gauss(xs[z], xs[jp], delta) / g_norm[z]
            total += w[jp] * q * ys[jp]
        out.append(total)
    return np.array(out)


def convolution_by_loops(k1, k2, w):
    a, b = len(k1), len(w)
    c = len(k2[0])
    return np.array([[sum(k1[i][z] * w[z] * k2[z][j] for z in range(b)) for j in range(c)] for i in range(a)])


def normal_equations(m, b, eps):
    m = np.asarray(m, dtype=float)
    return np.linalg.solve(m.T @ m + eps * np.eye(m.shape[1]), m.T @ np.asarray(b, dtype=float))


def ba_diagonal(a, v, eps):
    _, s, vt = np.linalg.svd(np.asarray(a, dtype=float), full_matrices=False)
    return sum(s[k] ** 2 / (s[k] ** 2 + eps) * (vt[k] @ v) * vt[k] for k in range(len(s)))
