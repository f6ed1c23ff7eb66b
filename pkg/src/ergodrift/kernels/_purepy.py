"""Pure-Python mirrors of the compiled kernels.

chain_logscale and backward_increments perform the same floating-point
operations in the same order as their compiled counterparts (which are
built with contraction disabled), so the two backends agree bit for bit
on IEEE-754 double platforms.  torus_walk_fourier mirrors the position
update exactly but accumulates the Fourier sums in numpy chunks for
speed; those sums can differ from the sequential compiled ones at the
rounding level (~1e-12 on 10^6-step walks).
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


def chain_logscale(gens: np.ndarray, letters: np.ndarray) -> tuple[np.ndarray, float]:
    """Left-to-right product of gens[letters[0]] @ gens[letters[1]] @ ...

    The running product is divided by its Frobenius norm after every
    factor; the removed scale accumulates in the returned logscale.
    Empty letter sequences give (identity, 0.0).
    """
    n_gen, d, _ = gens.shape
    g = [[[float(gens[a, i, j]) for j in range(d)] for i in range(d)] for a in range(n_gen)]
    p = [[1.0 if i == j else 0.0 for j in range(d)] for i in range(d)]
    logscale = 0.0
    for idx in letters:
        a = g[idx]
        q = [[0.0] * d for _ in range(d)]
        for i in range(d):
            pi = p[i]
            qi = q[i]
            for k in range(d):
                s = 0.0
                for j in range(d):
                    s += pi[j] * a[j][k]
                qi[k] = s
        f2 = 0.0
        for i in range(d):
            for j in range(d):
                x = q[i][j]
                f2 += x * x
        f = math.sqrt(f2)
        logscale += math.log(f)
        for i in range(d):
            for j in range(d):
                q[i][j] /= f
        p = q
    return np.array(p, dtype=np.float64), logscale


def backward_increments(
    gens: np.ndarray,
    letters: np.ndarray,
    v0: np.ndarray,
    v1: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the direction recursion backwards along a word.

    Starting from unit vectors v0, v1 at the far end, apply the letters
    in reverse order: w <- normalize(g_letter w).  incr[j] is
    log ||g_{letters[j]} w|| for the w held *before* applying letter j
    (the direction estimate for the shifted word), agree[j] is the sine
    of the angle between the two recursions at that same moment.
    """
    n_gen, d, _ = gens.shape
    g = [[[float(gens[a, i, j]) for j in range(d)] for i in range(d)] for a in range(n_gen)]
    n = len(letters)
    incr = np.empty(n, dtype=np.float64)
    agree = np.empty(n, dtype=np.float64)
    w = [float(x) for x in v0]
    u = [float(x) for x in v1]
    gw = [0.0] * d
    gu = [0.0] * d
    for j in range(n - 1, -1, -1):
        c = 0.0
        for i in range(d):
            c += w[i] * u[i]
        s2 = 0.0
        for i in range(d):
            r = w[i] - c * u[i]
            s2 += r * r
        agree[j] = math.sqrt(s2)
        a = g[letters[j]]
        for i in range(d):
            ai = a[i]
            sw = 0.0
            su = 0.0
            for k in range(d):
                sw += ai[k] * w[k]
                su += ai[k] * u[k]
            gw[i] = sw
            gu[i] = su
        nw2 = 0.0
        nu2 = 0.0
        for i in range(d):
            nw2 += gw[i] * gw[i]
            nu2 += gu[i] * gu[i]
        nw = math.sqrt(nw2)
        nu = math.sqrt(nu2)
        incr[j] = math.log(nw)
        for i in range(d):
            w[i] = gw[i] / nw
            u[i] = gu[i] / nu
    return incr, agree


def torus_walk_positions(
    gens: np.ndarray,
    x0: np.ndarray,
    letters: np.ndarray,
) -> np.ndarray:
    """All walk states x_0, x_1, ..., x_n (n = len(letters)), mod 1."""
    n_gen, d, _ = gens.shape
    g = [[[float(gens[a, i, j]) for j in range(d)] for i in range(d)] for a in range(n_gen)]
    n = len(letters)
    out = np.empty((n + 1, d), dtype=np.float64)
    x = [float(v) for v in x0]
    y = [0.0] * d
    out[0] = x
    for t in range(n):
        a = g[letters[t]]
        for i in range(d):
            ai = a[i]
            s = 0.0
            for j in range(d):
                s += ai[j] * x[j]
            y[i] = s - math.floor(s)
        x, y = y, x
        out[t + 1] = x
    return out


def torus_walk_fourier(
    gens: np.ndarray,
    x0: np.ndarray,
    letters: np.ndarray,
    kvecs: np.ndarray,
    include_start: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Walk the torus accumulating sum_t exp(2 pi i <k, x_t>) per k row.

    include_start=True accumulates states x_0 .. x_{n-1}, otherwise
    x_1 .. x_n; either way n = len(letters) states are accumulated.
    Returns (real sums, imaginary sums, state after all n steps).
    """
    positions = torus_walk_positions(gens, x0, letters)
    n = len(letters)
    states = positions[:n] if include_start else positions[1:]
    kmat = np.asarray(kvecs, dtype=np.float64).T
    m = kmat.shape[1]
    acc_re = np.zeros(m, dtype=np.float64)
    acc_im = np.zeros(m, dtype=np.float64)
    chunk = 16384
    for lo in range(0, n, chunk):
        block = states[lo : lo + chunk]
        ph = block @ kmat
        ph -= np.floor(ph)
        ang = (2.0 * math.pi) * ph
        acc_re += np.cos(ang).sum(axis=0)
        acc_im += np.sin(ang).sum(axis=0)
    return acc_re, acc_im, positions[n].copy()
