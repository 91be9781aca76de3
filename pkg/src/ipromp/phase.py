"""Temporal scaling estimation from partial observations.

Execution speed is summarized by a scalar alpha, the ratio of a
demonstration's duration to the nominal duration. A Gaussian over alpha is
learned from training durations; at test time the posterior over a candidate
grid is evaluated against the observed human samples and its argmax becomes
the phase estimate used for remapping and conditioning.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import ConfigError, DomainError, NumericalError, SchemaError

# Candidate grids never extend below this, even when the prior mass sits
# lower: tiny alphas make every observation map near z=1 and the likelihood
# surface degenerate.
ALPHA_GRID_FLOOR = 0.25


@dataclass(frozen=True)
class PhaseModel:
    """Gaussian over the temporal scaling factor plus its candidate grid."""
    mean_alpha: float
    std_alpha: float
    nominal_duration: float
    candidate_grid: np.ndarray
    floored: bool = False

    def __post_init__(self):
        grid = np.asarray(self.candidate_grid, dtype=np.float64)
        object.__setattr__(self, "candidate_grid", grid)
        if not (self.mean_alpha > 0):
            raise DomainError("mean_alpha must be positive")
        if not (self.std_alpha > 0):
            raise DomainError("std_alpha must be positive")
        if not (self.nominal_duration > 0):
            raise DomainError("nominal_duration must be positive")
        if grid.ndim != 1 or grid.shape[0] < 2:
            raise DomainError("candidate grid needs at least 2 points")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise DomainError("candidate grid must be positive and ascending")
        if np.isfinite(self.std_alpha):
            lo_req = max(ALPHA_GRID_FLOOR,
                         self.mean_alpha - 3.0 * self.std_alpha)
            hi_req = self.mean_alpha + 3.0 * self.std_alpha
            if grid[0] > lo_req + 1e-9 or grid[-1] < hi_req - 1e-9:
                raise DomainError(
                    f"candidate grid [{grid[0]:.4f}, {grid[-1]:.4f}] does not "
                    f"span the prior +-3 sigma range [{lo_req:.4f}, "
                    f"{hi_req:.4f}]")


@dataclass(frozen=True)
class ObservationBatch:
    """Human samples of one observation window.

    ``raw_times`` are seconds relative to the window start; ``window_index``
    times ``window_duration`` recovers absolute time. ``z_indices`` is only
    set after phase remapping.
    """
    raw_times: np.ndarray
    values: np.ndarray
    window_duration: float
    window_index: int = 0
    phase_alpha: float | None = None
    z_indices: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.raw_times, dtype=np.float64)
        y = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "raw_times", t)
        object.__setattr__(self, "values", y)
        if t.ndim != 1 or y.ndim != 2 or y.shape[0] != t.shape[0]:
            raise SchemaError(
                f"inconsistent batch shapes {t.shape} vs {y.shape}")
        if not (self.window_duration > 0):
            raise DomainError("window_duration must be positive")
        if self.window_index < 0:
            raise DomainError("window_index must be >= 0")
        if t.shape[0]:
            if np.any(t < -1e-12) or np.any(t > self.window_duration + 1e-9):
                raise DomainError("raw_times must lie within the window")
            if np.any(np.diff(t) <= 0):
                raise DomainError("raw_times must increase strictly")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
                raise DomainError("batch contains non-finite entries")
        if self.z_indices is not None:
            z = np.asarray(self.z_indices, dtype=np.float64)
            object.__setattr__(self, "z_indices", z)
            if z.shape != t.shape:
                raise SchemaError("z_indices must match raw_times")
            if z.shape[0] and (np.any(z < 0) or np.any(z > 1)
                               or np.any(np.diff(z) <= 0)):
                raise DomainError(
                    "z_indices must increase strictly within [0, 1]")

    @property
    def n_samples(self):
        return self.raw_times.shape[0]


def global_times(obs: ObservationBatch) -> np.ndarray:
    """Absolute sample times since the start of the interaction."""
    return obs.window_index * obs.window_duration + obs.raw_times


def build_candidate_grid(mean_alpha: float, std_alpha: float,
                         grid_points: int = 61, span_sigmas: float = 3.0,
                         floor: float = ALPHA_GRID_FLOOR) -> np.ndarray:
    """Geometric candidate grid spanning the prior +-span_sigmas range.

    Geometric spacing gives relatively finer resolution at small alphas,
    where a fixed phase error costs more seconds.
    """
    if grid_points < 2:
        raise ConfigError("grid_points must be >= 2")
    if span_sigmas < 3.0:
        raise ConfigError("span_sigmas below 3 breaks the grid coverage rule")
    lo = max(floor, mean_alpha - span_sigmas * std_alpha)
    hi = mean_alpha + span_sigmas * std_alpha
    if hi <= lo:
        hi = lo * 1.01
    return np.geomspace(lo, hi, grid_points)


def fit_phase(durations, nominal_duration: float, *,
              sigma_floor: float = 1e-3, grid_points: int = 61,
              grid_span_sigmas: float = 3.0) -> PhaseModel:
    """Gaussian over alpha = duration / nominal_duration from training demos.

    A single demo, or a degenerate set of identical durations, engages the
    sigma floor; the result is flagged via ``floored``.
    """
    d = np.asarray(durations, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] < 1:
        raise DomainError("need at least one training duration")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DomainError("durations must be positive and finite")
    if not (nominal_duration > 0):
        raise DomainError("nominal_duration must be positive")
    alphas = d / nominal_duration
    mean = float(alphas.mean())
    floored = False
    if alphas.shape[0] < 2:
        std = sigma_floor
        floored = True
    else:
        std = float(alphas.std(ddof=1))
        if std < sigma_floor:
            std = sigma_floor
            floored = True
    grid = build_candidate_grid(mean, std, grid_points=grid_points,
                                span_sigmas=grid_span_sigmas)
    return PhaseModel(mean_alpha=mean, std_alpha=std,
                      nominal_duration=nominal_duration, candidate_grid=grid,
                      floored=floored)


@dataclass(frozen=True)
class AlphaEstimate:
    """Argmax scaling candidate with the normalized posterior over the grid.

    ``log_likelihoods`` keeps the raw per-candidate observation log
    densities so callers scoring tasks need not rescan.
    """
    alpha_star: float
    log_posterior: np.ndarray
    index: int
    log_likelihoods: np.ndarray = None


def _scan_loglik(model, obs: ObservationBatch, alphas: np.ndarray,
                 obs_noise=None) -> np.ndarray:
    """Marginal log density of the batch under each candidate scaling."""
    if obs.values.shape[1] != model.layout.human_dofs:
        raise SchemaError(
            f"observation has {obs.values.shape[1]} DoFs, expected "
            f"{model.layout.human_dofs} human DoFs")
    mu_h, sig_hh, default_noise = model.human_blocks()
    if obs_noise is None:
        noise = default_noise
    else:
        noise = np.ascontiguousarray(np.broadcast_to(
            np.asarray(obs_noise, dtype=np.float64),
            (model.layout.human_dofs,)))
        if np.any(noise <= 0):
            raise ConfigError("observation noise must be positive")
    times = global_times(obs)
    try:
        return _kernels.window_loglik_scan(
            times, obs.values, model.basis.centers, model.basis.width,
            model.basis.normalize, mu_h, sig_hh, noise,
            np.ascontiguousarray(alphas, dtype=np.float64),
            model.phase.nominal_duration)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "observation likelihood is singular; increase observation noise"
        ) from exc


def observation_loglik(model, obs: ObservationBatch, alpha: float,
                       obs_noise=None) -> float:
    """Log density of the batch under one fixed temporal scaling."""
    if obs.n_samples == 0:
        raise DomainError("cannot score an empty observation batch")
    if not (alpha > 0):
        raise DomainError("alpha must be positive")
    return float(_scan_loglik(model, obs, np.array([alpha]),
                              obs_noise=obs_noise)[0])


def candidate_logliks(model, obs: ObservationBatch,
                      obs_noise=None) -> np.ndarray:
    """Batch log likelihood at every candidate scaling on the model's grid."""
    if obs.n_samples == 0:
        raise DomainError("cannot score an empty observation batch")
    return _scan_loglik(model, obs, model.phase.candidate_grid,
                        obs_noise=obs_noise)


def estimate_alpha(model, obs: ObservationBatch, obs_noise=None,
                   flat_prior: bool = False) -> AlphaEstimate:
    """Grid posterior over the temporal scaling given observed human samples.

    Scores each candidate by observation log likelihood plus the Gaussian
    log prior (dropped under ``flat_prior``), normalizes over the grid, and
    returns the argmax. Ties resolve toward the prior mean.
    """
    if obs.n_samples == 0:
        raise DomainError("cannot estimate phase from an empty batch")
    grid = model.phase.candidate_grid
    loglik = _scan_loglik(model, obs, grid, obs_noise=obs_noise)
    if flat_prior or not np.isfinite(model.phase.std_alpha):
        scores = loglik
    else:
        scores = loglik - 0.5 * ((grid - model.phase.mean_alpha)
                                 / model.phase.std_alpha) ** 2
    if not np.any(np.isfinite(scores)):
        raise NumericalError(
            "phase posterior vanished for every candidate scaling")
    log_post = scores - logsumexp(scores)
    best = np.flatnonzero(log_post == np.max(log_post))
    if best.shape[0] > 1:
        idx = int(best[np.argmin(np.abs(grid[best]
                                        - model.phase.mean_alpha))])
    else:
        idx = int(best[0])
    return AlphaEstimate(alpha_star=float(grid[idx]), log_posterior=log_post,
                         index=idx, log_likelihoods=loglik)


def remap(obs: ObservationBatch, alpha: float, nominal_duration: float
          ) -> ObservationBatch:
    """Attach phase indices z = t / (alpha * T_nominal), clipped to [0, 1].

    Past the clip point extra samples carry no new phase information, so
    duplicates created by clipping are dropped to keep z strictly
    increasing.
    """
    if not (alpha > 0):
        raise DomainError("alpha must be positive")
    if not (nominal_duration > 0):
        raise DomainError("nominal_duration must be positive")
    z = np.clip(global_times(obs) / (alpha * nominal_duration), 0.0, 1.0)
    if z.shape[0] == 0:
        return replace(obs, phase_alpha=float(alpha), z_indices=z)
    keep = np.concatenate(([True], np.diff(z) > 0))
    return ObservationBatch(raw_times=obs.raw_times[keep],
                            values=obs.values[keep],
                            window_duration=obs.window_duration,
                            window_index=obs.window_index,
                            phase_alpha=float(alpha), z_indices=z[keep])
