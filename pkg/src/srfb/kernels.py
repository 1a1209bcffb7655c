"""Hot numeric kernels.

Every kernel has a loop implementation compiled with numba and a
vectorised numpy twin (suffix ``_np``).  The public name is bound to the
numba version unless ``SRFB_DISABLE_JIT=1`` is set, see :mod:`srfb._jit`.
Both paths agree to rounding; they are not guaranteed bit-identical with
each other, only with themselves.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

__all__ = [
    "clip_box",
    "project_ball",
    "relax",
    "batch_moments",
    "adam_update",
    "gap_max",
]


# --- projections -----------------------------------------------------------

def clip_box_np(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def _clip_box_loop(x, lower, upper):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        v = x[i]
        if v < lower[i]:
            v = lower[i]
        elif v > upper[i]:
            v = upper[i]
        out[i] = v
    return out


def project_ball_np(x, center, radius):
    d = x - center
    r = np.sqrt(np.dot(d, d))
    if r <= radius:
        return x.copy()
    return center + d * (radius / r)


def _project_ball_loop(x, center, radius):
    n = x.shape[0]
    ss = 0.0
    for i in range(n):
        t = x[i] - center[i]
        ss += t * t
    r = np.sqrt(ss)
    out = np.empty_like(x)
    if r <= radius:
        for i in range(n):
            out[i] = x[i]
        return out
    s = radius / r
    for i in range(n):
        out[i] = center[i] + (x[i] - center[i]) * s
    return out


# --- relaxation ------------------------------------------------------------

def relax_np(x, x_bar_prev, delta):
    return (1.0 - delta) * x + delta * x_bar_prev


def _relax_loop(x, x_bar_prev, delta):
    out = np.empty_like(x)
    a = 1.0 - delta
    for i in range(x.shape[0]):
        out[i] = a * x[i] + delta * x_bar_prev[i]
    return out


# --- mini-batch averaging --------------------------------------------------

def batch_moments_np(exact, z, multiplicative, sigma):
    """Mean of the perturbed samples plus norm statistics of the samples.

    ``z`` holds standard normals, one row per sample.  Returns
    ``(mean, max_norm, sum_norm, sum_sqnorm)`` over the rows.
    """
    if multiplicative:
        samples = exact * (1.0 + sigma * z)
    else:
        samples = exact + sigma * z
    norms = np.sqrt(np.einsum("ij,ij->i", samples, samples))
    return samples.mean(axis=0), norms.max(), norms.sum(), np.dot(norms, norms)


def _batch_moments_loop(exact, z, multiplicative, sigma):
    m, n = z.shape
    acc = np.zeros(n)
    max_norm = 0.0
    sum_norm = 0.0
    sum_sq = 0.0
    for s in range(m):
        ss = 0.0
        for i in range(n):
            if multiplicative:
                v = exact[i] * (1.0 + sigma * z[s, i])
            else:
                v = exact[i] + sigma * z[s, i]
            acc[i] += v
            ss += v * v
        nrm = np.sqrt(ss)
        if nrm > max_norm:
            max_norm = nrm
        sum_norm += nrm
        sum_sq += ss
    return acc / m, max_norm, sum_norm, sum_sq


# --- Adam ------------------------------------------------------------------

def adam_update_np(anchor, z, y, g, beta1, beta2, t, alpha, eps):
    """One bias-corrected Adam move from ``anchor``; returns (x_new, z, y)."""
    z = beta1 * z + (1.0 - beta1) * g
    y = beta2 * y + (1.0 - beta2) * g * g
    z_hat = z / (1.0 - beta1 ** t)
    y_hat = y / (1.0 - beta2 ** t)
    return anchor - alpha * z_hat / (np.sqrt(y_hat) + eps), z, y


def _adam_update_loop(anchor, z, y, g, beta1, beta2, t, alpha, eps):
    n = anchor.shape[0]
    x_new = np.empty(n)
    z_new = np.empty(n)
    y_new = np.empty(n)
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(n):
        zi = beta1 * z[i] + (1.0 - beta1) * g[i]
        yi = beta2 * y[i] + (1.0 - beta2) * g[i] * g[i]
        z_new[i] = zi
        y_new[i] = yi
        x_new[i] = anchor[i] - alpha * (zi / c1) / (np.sqrt(yi / c2) + eps)
    return x_new, z_new, y_new


# --- gap function ----------------------------------------------------------

def gap_max_np(field_at_points, points, x):
    """max_j <F(y_j), x - y_j> over the rows; returns (value, argmax)."""
    vals = np.einsum("ij,ij->i", field_at_points, x - points)
    j = int(np.argmax(vals))
    return float(vals[j]), j


def _gap_max_loop(field_at_points, points, x):
    m, n = points.shape
    best = -np.inf
    arg = 0
    for j in range(m):
        v = 0.0
        for i in range(n):
            v += field_at_points[j, i] * (x[i] - points[j, i])
        if v > best:
            best = v
            arg = j
    return best, arg


_clip_box_nb = njit(_clip_box_loop)
_project_ball_nb = njit(_project_ball_loop)
_relax_nb = njit(_relax_loop)
_batch_moments_nb = njit(_batch_moments_loop)
_adam_update_nb = njit(_adam_update_loop)
_gap_max_nb = njit(_gap_max_loop)

if USE_NUMBA:
    clip_box = _clip_box_nb
    project_ball = _project_ball_nb
    relax = _relax_nb
    batch_moments = _batch_moments_nb
    adam_update = _adam_update_nb

    def gap_max(field_at_points, points, x):
        v, j = _gap_max_nb(field_at_points, points, x)
        return float(v), int(j)
else:
    clip_box = clip_box_np
    project_ball = project_ball_np
    relax = relax_np
    batch_moments = batch_moments_np
    adam_update = adam_update_np
    gap_max = gap_max_np

# (numba, numpy) pairs, used by the benchmark and the cross-path tests.
PAIRS = {
    "clip_box": (_clip_box_nb, clip_box_np),
    "project_ball": (_project_ball_nb, project_ball_np),
    "relax": (_relax_nb, relax_np),
    "batch_moments": (_batch_moments_nb, batch_moments_np),
    "adam_update": (_adam_update_nb, adam_update_np),
    "gap_max": (_gap_max_nb, gap_max_np),
}
