"""Task recognition over a library of interaction primitives.

Each candidate task is scored by its best-scaling observation likelihood
plus a log prior; the normalized posterior picks the task whose primitive is
conditioned and executed.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DomainError, SchemaError
from .phase import ObservationBatch, estimate_alpha, observation_loglik


@dataclass(frozen=True)
class TaskLibrary:
    """Ordered task primitives with prior probabilities."""
    task_ids: tuple
    models: tuple
    priors: np.ndarray

    def __post_init__(self):
        ids = tuple(self.task_ids)
        models = tuple(self.models)
        priors = np.asarray(self.priors, dtype=np.float64)
        if len(ids) < 1:
            raise ConfigError("a task library needs at least one task")
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate task ids in {ids}")
        if len(models) != len(ids):
            raise SchemaError("one model per task id required")
        if priors.shape != (len(ids),):
            raise SchemaError("one prior per task required")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ConfigError("priors must be positive and sum to 1")
        layouts = {(m.layout.human_dofs, m.layout.robot_dofs)
                   for m in models}
        if len(layouts) > 1:
            raise SchemaError(f"tasks disagree on the DoF layout: {layouts}")
        object.__setattr__(self, "task_ids", ids)
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "priors", priors)

    @classmethod
    def uniform(cls, named_models):
        """Library with equal priors from (task_id, model) pairs."""
        ids = tuple(name for name, _ in named_models)
        models = tuple(m for _, m in named_models)
        k = len(ids)
        return cls(ids, models, np.full(k, 1.0 / k) if k else np.array([]))

    @property
    def n_tasks(self):
        return len(self.task_ids)

    def model_of(self, task_id):
        try:
            return self.models[self.task_ids.index(task_id)]
        except ValueError:
            raise ConfigError(f"unknown task id {task_id!r}") from None


@dataclass(frozen=True)
class RecognitionResult:
    """Posterior over tasks for one observation batch."""
    task_id: str
    index: int
    log_posteriors: np.ndarray
    alphas: np.ndarray
    tie: bool = False

    def posterior(self):
        return np.exp(self.log_posteriors)


def recognize(library: TaskLibrary, obs: ObservationBatch, obs_noise=None,
              shared_alpha: bool = False) -> RecognitionResult:
    """Posterior over library tasks given one window of human samples.

    Per task the temporal scaling is first estimated, then the observation
    log likelihood at that scaling plus the log prior forms the task score.
    ``shared_alpha`` instead reuses the single best-likelihood scaling for
    every task's evidence (ablation switch, off by default). Exact score
    ties resolve to the lowest task index and are flagged.
    """
    if obs.n_samples == 0:
        raise DomainError("cannot recognize from an empty batch")
    estimates = [estimate_alpha(m, obs, obs_noise=obs_noise)
                 for m in library.models]
    alphas = np.array([e.alpha_star for e in estimates])
    logliks = np.array([e.log_likelihoods[e.index] for e in estimates])
    if shared_alpha:
        shared = alphas[int(np.argmax(logliks))]
        alphas = np.full_like(alphas, shared)
        logliks = np.array([
            observation_loglik(m, obs, shared, obs_noise=obs_noise)
            for m in library.models])
    scores = logliks + np.log(library.priors)
    log_post = scores - logsumexp(scores)
    best = np.flatnonzero(log_post == np.max(log_post))
    idx = int(best[0])
    return RecognitionResult(task_id=library.task_ids[idx], index=idx,
                             log_posteriors=log_post, alphas=alphas,
                             tie=best.shape[0] > 1)
