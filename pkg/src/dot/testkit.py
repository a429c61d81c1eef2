"""Brute-force oracles used by the test suite and the acceptance checks.

Everything here is written as an independent straight-line computation and
deliberately shares no code with the production paths it validates.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError


def finite_difference_gradient(f, Y, h: float = 1e-5, spot_bounds=None) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    If ``spot_bounds`` is given, perturbations that would push an entry
    below zero or a column sum outside [1, n_i] fall back to the one-sided
    difference that stays inside the box.
    """
    Y = np.asarray(Y, dtype=float)
    grad = np.zeros_like(Y)
    bounds = None
    if spot_bounds is not None:
        bounds = np.broadcast_to(np.asarray(spot_bounds, dtype=float), (Y.shape[1],))
    col_sums = Y.sum(axis=0)
    f0 = None
    for c in range(Y.shape[0]):
        for i in range(Y.shape[1]):
            up_ok = down_ok = True
            if bounds is not None:
                up_ok = col_sums[i] + h <= bounds[i]
                down_ok = (Y[c, i] - h >= 0.0) and (col_sums[i] - h >= 1.0)
            if up_ok and down_ok:
                grad[c, i] = (_shifted(f, Y, c, i, h) - _shifted(f, Y, c, i, -h)) / (2 * h)
            elif up_ok:
                if f0 is None:
                    f0 = f(Y)
                grad[c, i] = (_shifted(f, Y, c, i, h) - f0) / h
            elif down_ok:
                if f0 is None:
                    f0 = f(Y)
                grad[c, i] = (f0 - _shifted(f, Y, c, i, -h)) / h
            else:
                grad[c, i] = (_shifted(f, Y, c, i, h) - _shifted(f, Y, c, i, -h)) / (2 * h)
    return grad


def _shifted(f, Y, c, i, delta):
    Z = Y.copy()
    Z[c, i] += delta
    return f(Z)


def exhaustive_atom_oracle(gradient_column, n_i) -> np.ndarray:
    """Minimize <v, g> over the 2|C| vertices {e_c, n_i * e_c} by enumeration.

    Ties resolve to the smallest category index, then the smaller magnitude.
    """
    g = np.asarray(gradient_column, dtype=float)
    if not np.all(np.isfinite(g)):
        raise DegenerateInputError("gradient column contains non-finite entries")
    best_value = np.inf
    best = None
    for c in range(g.size):
        for scale in (1.0, float(n_i)):
            value = scale * g[c]
            if value < best_value:
                best_value = value
                best = (c, scale)
    column = np.zeros_like(g)
    column[best[0]] = best[1]
    return column


def gw_reduction_oracle(Z, M_s):
    """Both sides of the discrete-metric quadratic-assignment identity.

    lhs is the quadruple sum with the 0/1 category metric; rhs is the
    closed-form reduction. Returns ``(lhs, rhs)`` for an equality assertion.
    """
    Z = np.asarray(Z, dtype=float)
    M_s = np.asarray(M_s, dtype=float)
    if M_s.shape[0] != M_s.shape[1] or M_s.shape[0] != Z.shape[1]:
        raise DegenerateInputError("spot metric must be square and match the spot count")
    if not np.allclose(M_s, M_s.T, atol=0.0):
        raise DegenerateInputError("spot metric must be symmetric")
    n_cat, n_spots = Z.shape

    lhs = 0.0
    for c in range(n_cat):
        for k in range(n_cat):
            m_r = 0.0 if c == k else 1.0
            for i in range(n_spots):
                for j in range(n_spots):
                    lhs += Z[c, i] * Z[k, j] * (m_r - M_s[i, j]) ** 2

    p = Z.sum(axis=0)
    beta = 0.0
    cross = 0.0
    for i in range(n_spots):
        for j in range(n_spots):
            beta += (1.0 - M_s[i, j]) ** 2 * p[i] * p[j]
            cross += (2.0 * M_s[i, j] - 1.0) * float(Z[:, i] @ Z[:, j])
    return lhs, beta + cross
