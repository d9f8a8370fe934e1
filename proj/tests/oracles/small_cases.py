#!/usr/bin/env python3
# Copyright 2026 The apdg-dmpc Authors
# SPDX-License-Identifier: Apache-2.0
"""Small closed-form and enumeration oracles.

QPs by brute-force active-set enumeration, LPs by vertex enumeration, and the
scalar Riccati equation by its quadratic formula.
"""
import itertools
import numpy as np


def qp_enumerate(W, q, G, h):
    """min u'Wu + q'u s.t. Gu <= h by trying every active set."""
    n = len(q)
    H = 2 * W
    best = None
    for k in range(0, min(n, len(h)) + 1):
        for act in itertools.combinations(range(len(h)), k):
            Ga = G[list(act)] if act else np.zeros((0, n))
            kkt = np.block([[H, Ga.T], [Ga, np.zeros((k, k))]])
            rhs = np.concatenate([-q, h[list(act)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            u, mult = sol[:n], sol[n:]
            if np.all(G @ u <= h + 1e-10) and np.all(mult >= -1e-10):
                val = u @ W @ u + q @ u
                if best is None or val < best[1] - 1e-12:
                    best = (u, val)
    return best


def lp_vertices(c, G, h):
    n = len(c)
    best = None
    for rows in itertools.combinations(range(len(h)), n):
        Gs = G[list(rows)]
        if abs(np.linalg.det(Gs)) < 1e-12:
            continue
        x = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ x <= h + 1e-10) and (best is None or c @ x > best[1]):
            best = (x, c @ x)
    return best


def random_qp(rng, n, r):
    L = rng.uniform(-1, 1, (n, n))
    W = L @ L.T + 0.5 * np.eye(n)
    q = rng.uniform(-3, 3, n)
    G = rng.uniform(-1, 1, (r, n))
    h = rng.uniform(0.1, 1.0, r)
    return W, q, G, h


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    u, v = qp_enumerate(np.eye(2), np.array([-2.0, -2.0]), np.array([[-1.0, 0], [0, -1.0], [1.0, 1.0]]),
                        np.array([0.0, 0.0, 1.0]))
    print("simplex qp:", u.tolist(), v)
    x, v = lp_vertices(np.array([2.0, 1.0]), np.array([[-1.0, 0], [0, -1.0], [1.0, 1.0]]), np.array([0.0, 0.0, 1.0]))
    print("simplex lp:", x.tolist(), v)
    p = (0.25 + np.sqrt(0.0625 + 4)) / 2
    print("scalar dare p =", repr(p), "k =", repr(-0.5 * p / (1 + p)))
    rng = np.random.default_rng(20261017)
    for idx in range(3):
        W, q, G, h = random_qp(rng, 3, 5)
        u, v = qp_enumerate(W, q, G, h)
        print(f"random qp {idx}:")
        print("  W =", W.ravel().tolist())
        print("  q =", q.tolist())
        print("  G =", G.ravel().tolist())
        print("  h =", h.tolist())
        print("  u* =", u.tolist(), "value =", repr(v))
