"""Smooth hand-over between successive robot trajectory predictions.

As each observation window refines the prediction, the executing trajectory
cannot jump: the incoming prediction is faded in through a precision-weighted
Gaussian product, with complementary sigmoid activations centered after the
current time so the executed prefix stays frozen.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError, NumericalError, SchemaError
from .promp import PredictedDistribution

# Activations are clamped away from exact 0/1 so every component keeps an
# invertible precision contribution.
_ACT_EPS = 1e-15
# Below this total activation the product is considered degenerate.
_DEGENERATE_EPS = 1e-6


@dataclass(frozen=True)
class ActivationProfile:
    """Sigmoid activation over phase: rising or its mirrored falling twin."""
    gradient: float
    switch_time: float
    kind: str = "rise"

    def __post_init__(self):
        if not (self.gradient > 0):
            raise ConfigError("activation gradient must be positive")
        if self.kind not in ("rise", "fall"):
            raise ConfigError(f"unknown activation kind {self.kind!r}")

    def mirrored(self):
        other = "fall" if self.kind == "rise" else "rise"
        return replace(self, kind=other)


def activation(profile: ActivationProfile, t):
    """Activation value(s) at time t, strictly inside (0, 1)."""
    x = profile.gradient * (np.asarray(t, dtype=np.float64)
                            - profile.switch_time)
    if profile.kind == "fall":
        x = -x
    return np.clip(expit(x), _ACT_EPS, 1.0 - _ACT_EPS)


def product_step(dists, activations):
    """Activation-weighted Gaussian product of one phase step.

    ``dists`` is a sequence of (mean, cov) pairs over the same DoFs;
    each covariance is scaled by its inverse activation, so the product
    precision is the activation-weighted sum of precisions:

        cov* = (sum_i a_i cov_i^-1)^-1
        mean* = cov* sum_i a_i cov_i^-1 mean_i
    """
    acts = np.asarray(activations, dtype=np.float64)
    if len(dists) == 0 or acts.shape != (len(dists),):
        raise SchemaError("need one activation per distribution")
    if np.any(acts <= 0) or np.any(acts > 1.0):
        raise DomainError("activations must lie in (0, 1]")
    if np.max(acts) < _DEGENERATE_EPS:
        raise NumericalError("all blend activations vanished")
    q = np.asarray(dists[0][0]).shape[0]
    prec = np.zeros((q, q))
    lean = np.zeros(q)
    for (mean, cov), a in zip(dists, acts):
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(cov, dtype=np.float64)
        if mean.shape != (q,) or cov.shape != (q, q):
            raise SchemaError("blend components disagree on the DoF count")
        try:
            p_i = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular covariance in blend product") \
                from exc
        prec += a * p_i
        lean += a * (p_i @ mean)
    try:
        cov_out = np.linalg.inv(prec)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("blend product precision is singular") from exc
    cov_out = 0.5 * (cov_out + cov_out.T)
    return cov_out @ lean, cov_out


def _product_grid(means_a, covs_a, means_b, covs_b, act_a, act_b):
    """Two-component product applied across a phase grid (vectorized)."""
    prec_a = np.linalg.inv(covs_a)
    prec_b = np.linalg.inv(covs_b)
    prec = (act_a[:, None, None] * prec_a + act_b[:, None, None] * prec_b)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    lean = (act_a[:, None] * np.einsum("mab,mb->ma", prec_a, means_a)
            + act_b[:, None] * np.einsum("mab,mb->ma", prec_b, means_b))
    return np.einsum("mab,mb->ma", cov, lean), cov


@dataclass(frozen=True)
class BlendState:
    """Currently executing prediction plus hand-over bookkeeping."""
    current: PredictedDistribution
    incoming: PredictedDistribution | None = None
    profile: ActivationProfile | None = None
    blend_count: int = 0
    last_jump: float = 0.0
    last_jump_bound: float = float("inf")


def continuity_bound(mean_cur, cov_cur, mean_inc, cov_inc, ratio):
    """Upper bound on the blended mean's distance from the current mean.

    With activation ratio r = a_rise / a_fall the product mean satisfies
    ||mean* - mean_cur|| <= r * (lmax(cov_cur) / lmin(cov_inc))
                            * ||mean_inc - mean_cur||.
    """
    lmax = float(np.max(np.linalg.eigvalsh(cov_cur)))
    lmin = float(np.min(np.linalg.eigvalsh(cov_inc)))
    if lmin <= 0:
        return float("inf")
    return ratio * (lmax / lmin) * float(
        np.linalg.norm(mean_inc - mean_cur))


def blend_update(state: BlendState, incoming: PredictedDistribution,
                 profile: ActivationProfile, now: float) -> BlendState:
    """Fold a new prediction into the executing one from phase ``now`` on.

    The executed prefix (z < now) stays frozen. For z >= now the current and
    incoming predictions are combined by the precision-weighted product with
    complementary sigmoid activations (falling on the current, rising on the
    incoming), centered at the profile's switch time. Continuity
    diagnostics at the first blended phase are recorded on the new state.
    """
    cur = state.current
    if incoming.z_grid.shape != cur.z_grid.shape or np.any(
            incoming.z_grid != cur.z_grid):
        raise SchemaError("incoming prediction is on a different phase grid")
    if incoming.n_dofs != cur.n_dofs:
        raise SchemaError("incoming prediction has a different DoF count")
    if profile.kind != "rise":
        raise ConfigError("blend_update expects the rising profile")
    if not np.isfinite(now):
        raise DomainError("current time must be finite")
    if profile.switch_time < now:
        raise DomainError(
            f"switch time {profile.switch_time:.4f} lies before the current "
            f"time {now:.4f}; the executed prefix would jump")

    z = cur.z_grid
    mask = z >= now
    a_rise = activation(profile, z)
    a_fall = 1.0 - a_rise

    means = cur.means.copy()
    covs = cur.covariances.copy()
    if np.any(mask):
        m_new, c_new = _product_grid(
            cur.means[mask], cur.covariances[mask],
            incoming.means[mask], incoming.covariances[mask],
            a_fall[mask], a_rise[mask])
        means[mask] = m_new
        covs[mask] = c_new

    jump = 0.0
    bound = float("inf")
    if np.any(mask):
        first = int(np.flatnonzero(mask)[0])
        jump = float(np.linalg.norm(means[first] - cur.means[first]))
        ratio = float(a_rise[first] / a_fall[first])
        bound = continuity_bound(cur.means[first], cur.covariances[first],
                                 incoming.means[first],
                                 incoming.covariances[first], ratio)

    blended = PredictedDistribution(z_grid=z, means=means, covariances=covs,
                                    source_task=incoming.source_task)
    return BlendState(current=blended, incoming=incoming, profile=profile,
                      blend_count=state.blend_count + 1, last_jump=jump,
                      last_jump_bound=bound)
