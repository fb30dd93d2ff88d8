"""Brute-force reference computations shared by the test modules.

Nothing here calls into the package beyond the gauge itself.
"""
import numpy as np

LEFT, BISECTOR, RIGHT = -1, 0, 1


def grid_labels(body, x, Y, t_end=100.0, num=10_000, eps_f=1e-9, chunk=64):
    """Sign scan of ``f(t) = g(ty + x) - g(ty - x)`` on ``num`` uniform ``t`` in ``(0, t_end]``.

    BISECTOR when ``|f| <= eps_f`` somewhere or ``f`` changes sign, else the sign of ``f``.
    """
    x = np.asarray(x, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    t = np.linspace(0.0, t_end, num + 1)[1:]
    out = np.empty(len(Y), dtype=int)
    for a in range(0, len(Y), chunk):
        B = Y[a:a + chunk]
        R = t[None, :, None] * B[:, None, :]
        F = body.gauge(R + x) - body.gauge(R - x)
        zero = np.any(np.abs(F) <= eps_f, axis=1)
        pos = np.any(F > eps_f, axis=1)
        neg = np.any(F < -eps_f, axis=1)
        out[a:a + chunk] = np.where(zero | (pos & neg), BISECTOR, np.where(pos, RIGHT, LEFT))
    return out


def random_unit(body, n, count, seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(count, n))
    return V / body.gauge(V)[:, None]


def grid_line_min(body, p, d, lo, hi, num):
    t = np.linspace(lo, hi, num)
    g = body.gauge(np.asarray(p) + t[:, None] * np.asarray(d))
    return g.min()
