"""Pure-Python elliptical slice kernel; mirrors ``_ess.pyx`` step for step."""
import math

import numpy as np

LOG_CLIP_LO = math.log(1e-12)
LOG_CLIP_HI = math.log1p(-1e-12)

BINOMIAL = 0
DENSITY = 1


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def loglik(eta, kind, c1, c2, total):
    """Log-likelihood of linear predictor ``eta`` on compressed rows.

    ``BINOMIAL``: ``c1``/``c2`` are success/failure counts per row.
    ``DENSITY``: ``c1`` are counts per grid cell, ``c2`` log cell volumes and
    ``total`` the number of observations.
    """
    if kind == BINOMIAL:
        lp = np.clip(-_softplus(-eta), LOG_CLIP_LO, LOG_CLIP_HI)
        lq = np.clip(-_softplus(eta), LOG_CLIP_LO, LOG_CLIP_HI)
        return float(np.dot(c1, lp) + np.dot(c2, lq))
    x = eta + c2
    top = x.max()
    return float(np.dot(c1, eta) - total * (top + math.log(np.sum(np.exp(x - top)))))


def ess_block(theta, eta, ll, nus, eta_nus, logu, phi0, pool, pool_pos,
              kind, c1, c2, total, theta_out, ll_out, evals_out):
    """Run elliptical slice steps until the block ends or the shrink pool runs dry.

    ``theta`` and ``eta`` are updated in place.  Returns
    ``(steps_done, pool_pos, ll)``; a step interrupted by an empty pool is not
    counted and leaves the state untouched.
    """
    n_steps = logu.shape[0]
    n_pool = pool.shape[0]
    for i in range(n_steps):
        threshold = ll + logu[i]
        phi = phi0[i]
        lo = phi - 2.0 * math.pi
        hi = phi
        evals = 0
        while True:
            c = math.cos(phi)
            s = math.sin(phi)
            prop = c * eta + s * eta_nus[i]
            ll_prop = loglik(prop, kind, c1, c2, total)
            evals += 1
            if ll_prop > threshold:
                break
            if phi < 0.0:
                lo = phi
            else:
                hi = phi
            if pool_pos >= n_pool:
                return i, pool_pos, ll
            phi = lo + (hi - lo) * pool[pool_pos]
            pool_pos += 1
        theta *= c
        theta += s * nus[i]
        eta[:] = prop
        ll = ll_prop
        theta_out[i] = theta
        ll_out[i] = ll
        evals_out[i] = evals
    return n_steps, pool_pos, ll
