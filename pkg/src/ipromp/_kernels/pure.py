"""Numpy reference implementation of the hot kernels.

The compiled module in ``_core.pyx`` mirrors these signatures; either one can
serve the rest of the package. Keep the two in sync — ``tests/test_kernels.py``
checks them against each other.
"""
import numpy as np

BACKEND = "pure"


def rbf_rows(z, centers, width, normalize):
    """Evaluate Gaussian radial basis functions at each phase value.

    :param z: array (T,) of phase values
    :param centers: array (N,) of basis centers
    :param width: common bandwidth (> 0)
    :param normalize: divide each row by its sum
    :return: array (T, N); row t holds the basis values at z[t]
    """
    z = np.asarray(z, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    d = (z[:, None] - centers[None, :]) / width
    rows = np.exp(-0.5 * d * d)
    if normalize:
        rows = rows / rows.sum(axis=1, keepdims=True)
    return rows


def window_loglik_scan(times, values, centers, width, normalize,
                       mu_h, sig_hh, noise_var, alphas, t_ref):
    """Gaussian log-likelihood of one observation window per candidate scaling.

    For each candidate a, sample times are remapped to phases
    z = clip(t / (a * t_ref), 0, 1) and the window's stacked human samples are
    scored under the marginal N(mean, cov) implied by the weight distribution,
    with per-DoF observation noise added on the diagonal.

    :param times: (s,) global elapsed seconds of the samples
    :param values: (s, P) observed human samples
    :param centers: (N,) basis centers
    :param width: basis bandwidth
    :param normalize: basis row normalization flag
    :param mu_h: (P, N) per-DoF weight means for the human block
    :param sig_hh: (P, N, P, N) human-block weight covariance
    :param noise_var: (P,) per-DoF observation noise variances
    :param alphas: (C,) candidate temporal scaling factors
    :param t_ref: nominal full-task duration in seconds
    :return: (C,) log densities; the observation vector is stacked
        sample-major (sample j, DoF d) -> j * P + d
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    s, P = values.shape
    C = alphas.shape[0]
    n = s * P

    z = np.clip(times[None, :] / (alphas[:, None] * t_ref), 0.0, 1.0)
    Phi = rbf_rows(z.reshape(-1), centers, width, normalize).reshape(C, s, -1)

    mean = np.einsum("csn,pn->csp", Phi, mu_h, optimize=True)
    half = np.einsum("csn,anbm->csabm", Phi, sig_hh, optimize=True)
    cov = np.einsum("csabm,ctm->csatb", half, Phi, optimize=True)
    cov = cov.reshape(C, n, n)
    idx = np.arange(n)
    cov[:, idx, idx] += np.tile(np.asarray(noise_var, dtype=np.float64), s)

    delta = values.reshape(-1)[None, :] - mean.reshape(C, n)
    L = np.linalg.cholesky(cov)
    x = np.linalg.solve(L, delta[:, :, None])[:, :, 0]
    quad = np.sum(x * x, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    return -0.5 * (quad + logdet + n * np.log(2.0 * np.pi))
