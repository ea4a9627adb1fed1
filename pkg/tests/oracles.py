"""Independent reference computations used by the tests.

Nothing here calls into the code paths it is used to check.
"""

import math

import numpy as np
from scipy.special import erfc


def prior_double_sum(r_of_lag, k, theta1_variance):
    """Literal double sum ``s1 + sum_{l<m} sum_{l'<m'} R(l - l')`` (1-based m, m')."""
    c = np.empty((k, k))
    for m in range(1, k + 1):
        for mp in range(1, k + 1):
            total = 0.0
            for l in range(1, m):
                for lp in range(1, mp):
                    total += r_of_lag(l - lp)
            c[m - 1, mp - 1] = theta1_variance + total
    return c


def dense_log_posterior(theta, y, s_hat, sigma2_k, cov):
    """Direct dense evaluation of the log-posterior with ``C^-1`` from a linear solve."""
    data = np.sum(2.0 / sigma2_k * np.real(y * np.conj(s_hat) * np.exp(-1j * theta)))
    return data - 0.5 * theta @ np.linalg.solve(cov, theta)


def central_difference_gradient(f, x, step=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def central_difference_jacobian(f, x, step=1e-6):
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.column_stack(cols)


def _upper_envelope_max(t, b, u):
    """``max_j (b_j - u * t_j)`` for every query slope ``u``.

    Exact maximum over all grid points, computed from the upper concave hull of
    the points ``(t_j, b_j)`` (t sorted ascending).
    """
    hull = []
    for j in range(len(t)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or below the chord i0 -> j
            if (b[i1] - b[i0]) * (t[j] - t[i0]) <= (b[j] - b[i0]) * (t[i1] - t[i0]):
                hull.pop()
            else:
                break
        hull.append(j)
    hull = np.array(hull)
    th, bh = t[hull], b[hull]
    slopes = np.diff(bh) / np.diff(th)  # strictly decreasing along the hull
    # vertex j is optimal for slopes[j] <= u <= slopes[j-1]
    pos = np.searchsorted(-slopes, -u, side="left")
    values = bh[pos] - u * th[pos]
    return values, hull[pos]


def grid_search_map3(y, s_hat, sigma2_k, precision, center, half_width=0.5, step=1e-3):
    """Exhaustive maximum of the 3-sample log-posterior on a regular grid.

    The grid is ``center[i] + [-half_width, half_width]`` per coordinate with
    spacing ``step``. The innermost coordinate is eliminated exactly via an
    upper-envelope transform, so the result equals a brute-force scan of every
    grid point without materializing all of them.
    """
    n = int(round(2 * half_width / step)) + 1
    offsets = np.linspace(-half_width, half_width, n)
    grids = [center[i] + offsets for i in range(3)]
    p = precision

    def unary(i):
        t = grids[i]
        return (2.0 / sigma2_k[i]) * np.real(y[i] * np.conj(s_hat[i]) * np.exp(-1j * t)) - 0.5 * p[i, i] * t**2

    a0, a1, b2 = unary(0), unary(1), unary(2)
    t0, t1, t2 = grids
    # l = a0 + a1 + b2 - p01 t0 t1 - p02 t0 t2 - p12 t1 t2
    u = p[0, 2] * t0[:, None] + p[1, 2] * t1[None, :]
    env, arg2 = _upper_envelope_max(t2, b2, u.ravel())
    total = a0[:, None] + a1[None, :] - p[0, 1] * np.outer(t0, t1) + env.reshape(n, n)
    i0, i1 = np.unravel_index(np.argmax(total), total.shape)
    i2 = arg2.reshape(n, n)[i0, i1]
    return np.array([t0[i0], t1[i1], t2[i2]]), float(total[i0, i1])


def brute_force_grid3(y, s_hat, sigma2_k, precision, center, half_width, step):
    n = int(round(2 * half_width / step)) + 1
    offsets = np.linspace(-half_width, half_width, n)
    g = np.stack(np.meshgrid(*(center[i] + offsets for i in range(3)), indexing="ij"), axis=-1)
    theta = g.reshape(-1, 3)
    data = np.sum(2.0 / sigma2_k * np.real(y * np.conj(s_hat) * np.exp(-1j * theta)), axis=1)
    quad = np.einsum("ni,ij,nj->n", theta, precision, theta)
    vals = data - 0.5 * quad
    best = np.argmax(vals)
    return theta[best], float(vals[best])


def scalar_wiener_eks(y, s_hat, sigma2_k, increment_variance, theta1_variance, initial_phase):
    """Scalar EKF (information-form update) + RTS for ``theta_k = theta_{k-1} + w_k``, ``w ~ N(0, q)``."""
    k_len = len(y)
    xp, pp, xf, pf = (np.empty(k_len) for _ in range(4))
    x, p = initial_phase, theta1_variance
    for k in range(k_len):
        if k > 0:
            p = p + increment_variance
        xp[k], pp[k] = x, p
        if s_hat[k] != 0:
            pred = s_hat[k] * np.exp(1j * x)
            h = np.array([-pred.imag, pred.real])
            res = y[k] - pred
            r = sigma2_k[k] / 2
            # information form: no cancellation for a diffuse initial prior
            p = 1.0 / (1.0 / p + (h @ h) / r)
            x = x + p * (h @ np.array([res.real, res.imag])) / r
        xf[k], pf[k] = x, p
    xs, ps = xf.copy(), pf.copy()
    for k in range(k_len - 2, -1, -1):
        g = pf[k] / pp[k + 1]
        xs[k] = xf[k] + g * (xs[k + 1] - xp[k + 1])
        ps[k] = pf[k] + g * g * (ps[k + 1] - pp[k + 1])
    return xs, ps


def qfunc(x):
    return 0.5 * erfc(x / math.sqrt(2.0))


def qam_awgn_ser(order, snr_linear):
    """Symbol error probability of square M-QAM in AWGN, ``Es/N0 = snr_linear``."""
    side = math.isqrt(order)
    p_axis = 2.0 * (1.0 - 1.0 / side) * qfunc(math.sqrt(3.0 * snr_linear / (order - 1)))
    return 1.0 - (1.0 - p_axis) ** 2


def simulate_ar_recursion(coeffs, innovation_variance, n, rng, burn_in=5000):
    """Plain AR recursion driven by white Gaussian noise."""
    p = len(coeffs)
    total = n + burn_in
    delta = math.sqrt(innovation_variance) * rng.standard_normal(total)
    z = np.zeros(total)
    for k in range(total):
        acc = delta[k]
        for i in range(1, p + 1):
            if k - i >= 0:
                acc += coeffs[i - 1] * z[k - i]
        z[k] = acc
    return z[burn_in:]
