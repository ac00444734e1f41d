"""Compiled inner loops. Semantics mirror the pure-Python definitions in
``linear`` and ``trainer``; tests check them against each other."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _softplus_neg(m):
    if m >= 0.0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


@njit(cache=True)
def _sigmoid_neg(m):
    if m >= 0.0:
        e = math.exp(-m)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(m))


@njit(cache=True)
def _row_dot(X, i, w):
    # explicit loop: for short rows a BLAS call costs more than the arithmetic
    s = 0.0
    for j in range(w.shape[0]):
        s += X[i, j] * w[j]
    return s


@njit(cache=True)
def mean_loss(X, y, w):
    total = 0.0
    for i in range(X.shape[0]):
        total += _softplus_neg(y[i] * _row_dot(X, i, w))
    return total / X.shape[0]


@njit(cache=True)
def shuffle_into(u, perm):
    """Fill ``perm`` with a shuffle of 0..n-1; ``u[k]`` picks the partner for
    position n-1-k."""
    n = perm.shape[0]
    for i in range(n):
        perm[i] = i
    for k in range(n - 1):
        i = n - 1 - k
        j = int(u[k] * (i + 1))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp


@njit(cache=True)
def run_epochs(X, y, w, eta, U, t0, record_every, threshold, rec_w, rec_t, rec_loss, perms):
    """Run up to ``U.shape[0]`` epochs of without-replacement SGD in place.

    Records every ``record_every``-th iterate (global index) into the ``rec_*``
    buffers. Stops after the first epoch whose end-of-epoch mean loss is below
    ``threshold``. Returns (epochs_run, records_written, stopped, last_loss).
    """
    n = X.shape[0]
    t = t0
    nrec = 0
    loss = -1.0
    for e in range(U.shape[0]):
        perm = perms[e]
        shuffle_into(U[e], perm)
        for k in range(n):
            i = perm[k]
            coef = eta * y[i] * _sigmoid_neg(y[i] * _row_dot(X, i, w))
            for j in range(w.shape[0]):
                w[j] += coef * X[i, j]
            t += 1
            if t % record_every == 0:
                rec_w[nrec, :] = w
                rec_t[nrec] = t
                if k == n - 1:
                    loss = mean_loss(X, y, w)
                    rec_loss[nrec] = loss
                else:
                    rec_loss[nrec] = mean_loss(X, y, w)
                nrec += 1
        if t % record_every != 0:
            loss = mean_loss(X, y, w)
        if loss < threshold:
            return e + 1, nrec, True, loss
    return U.shape[0], nrec, False, loss


@njit(cache=True)
def dual_sweeps(G, alpha, sweeps):
    """Cyclic exact coordinate maximisation of sum(a) - a'Ga/2 over a >= 0."""
    n = G.shape[0]
    for _ in range(sweeps):
        for i in range(n):
            g = 1.0 - np.dot(G[i], alpha)
            a = alpha[i] + g / G[i, i]
            alpha[i] = a if a > 0.0 else 0.0
    return alpha


@njit(cache=True)
def splitmix_uniforms(state, k):
    """The next ``k`` SplitMix64 uniforms after ``state`` (top 53 bits)."""
    out = np.empty(k)
    gamma = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    s = np.uint64(state)
    for i in range(k):
        s += gamma
        z = s
        z = (z ^ (z >> np.uint64(30))) * m1
        z = (z ^ (z >> np.uint64(27))) * m2
        z = z ^ (z >> np.uint64(31))
        out[i] = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out
