"""Joint human-robot movement primitives in weight space.

A model is a Gaussian over the stacked basis weights of all degrees of
freedom, learned from full demonstrations. Conditioning on partial
(human-only) observations shifts the correlated robot block, which is read
out as a time-indexed robot trajectory distribution.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basis import BasisSystem, design_matrix, evaluate
from .errors import ConfigError, DomainError, NumericalError, SchemaError
from .phase import ObservationBatch, PhaseModel, fit_phase

DOF_KIND_FULL = "full"
DOF_KIND_HUMAN = "human_only"


@dataclass(frozen=True)
class InteractionLayout:
    """Dimension bookkeeping: P human DoFs followed by Q robot DoFs."""
    human_dofs: int
    robot_dofs: int
    dof_names: tuple = ()

    def __post_init__(self):
        if self.human_dofs < 1 or self.robot_dofs < 1:
            raise ConfigError("need at least one human and one robot DoF")
        names = tuple(self.dof_names) if self.dof_names else tuple(
            [f"h{i}" for i in range(self.human_dofs)]
            + [f"r{i}" for i in range(self.robot_dofs)])
        if len(names) != self.human_dofs + self.robot_dofs:
            raise SchemaError(
                f"expected {self.human_dofs + self.robot_dofs} DoF names, "
                f"got {len(names)}")
        object.__setattr__(self, "dof_names", names)

    @property
    def total_dofs(self):
        return self.human_dofs + self.robot_dofs


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped multi-DoF sample sequence.

    ``samples`` is (T, D) with D = P + Q for demonstrations and D = P for
    human-only observation streams. Timestamps start at zero and increase
    strictly.
    """
    timestamps: np.ndarray
    samples: np.ndarray
    dof_kind: str = DOF_KIND_FULL

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        y = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "samples", y)
        if t.ndim != 1 or y.ndim != 2 or t.shape[0] != y.shape[0]:
            raise SchemaError(
                f"inconsistent trajectory shapes {t.shape} vs {y.shape}")
        if t.shape[0] < 2:
            raise SchemaError("a trajectory needs at least 2 samples")
        if abs(t[0]) > 1e-12:
            raise SchemaError("trajectory timestamps must start at 0")
        if np.any(np.diff(t) <= 0):
            raise SchemaError("trajectory timestamps must increase strictly")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(t)):
            raise SchemaError("trajectory contains non-finite samples")
        if self.dof_kind not in (DOF_KIND_FULL, DOF_KIND_HUMAN):
            raise SchemaError(f"unknown dof_kind {self.dof_kind!r}")

    @property
    def duration(self):
        return float(self.timestamps[-1])

    @property
    def n_samples(self):
        return self.timestamps.shape[0]

    @property
    def n_dofs(self):
        return self.samples.shape[1]


def resample_trajectory(traj: Trajectory, n: int) -> Trajectory:
    """Linearly resample onto n evenly spaced timestamps over the duration."""
    if n < 2:
        raise DomainError("resampling needs at least 2 points")
    t_new = np.linspace(0.0, traj.duration, n)
    cols = [np.interp(t_new, traj.timestamps, traj.samples[:, d])
            for d in range(traj.n_dofs)]
    return Trajectory(t_new, np.column_stack(cols), traj.dof_kind)


def human_part(traj: Trajectory, layout: InteractionLayout) -> Trajectory:
    """Extract the human block of a full demonstration as an observation stream."""
    if traj.dof_kind != DOF_KIND_FULL:
        raise SchemaError("human_part expects a full trajectory")
    if traj.n_dofs != layout.total_dofs:
        raise SchemaError(
            f"trajectory has {traj.n_dofs} DoFs, layout expects "
            f"{layout.total_dofs}")
    return Trajectory(traj.timestamps,
                      traj.samples[:, :layout.human_dofs], DOF_KIND_HUMAN)


def robot_part(traj: Trajectory, layout: InteractionLayout) -> np.ndarray:
    """Robot-block samples (T, Q) of a full demonstration."""
    if traj.n_dofs != layout.total_dofs:
        raise SchemaError("trajectory does not match layout")
    return traj.samples[:, layout.human_dofs:]


@dataclass(frozen=True)
class PredictedDistribution:
    """Time-indexed Gaussian over the robot DoFs."""
    z_grid: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    source_task: str = ""

    def __post_init__(self):
        z = np.asarray(self.z_grid, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.covariances, dtype=np.float64)
        if m.shape[0] != z.shape[0] or c.shape[0] != z.shape[0]:
            raise SchemaError("grid/mean/cov lengths disagree")
        if c.shape[1] != c.shape[2] or c.shape[1] != m.shape[1]:
            raise SchemaError("covariance blocks do not match the DoF count")
        if np.max(np.abs(c - np.transpose(c, (0, 2, 1)))) > 1e-8:
            raise SchemaError("covariance blocks must be symmetric")
        c = 0.5 * (c + np.transpose(c, (0, 2, 1)))
        if np.min(np.linalg.eigvalsh(c)) < -1e-8:
            raise NumericalError("covariance blocks are not PSD within tolerance")
        object.__setattr__(self, "z_grid", z)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covariances", c)

    @property
    def n_dofs(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class PrompModel:
    """Gaussian over stacked basis weights for all DoFs of one task.

    Weight layout: DoF-major, ``weight_mean[d * N:(d + 1) * N]`` holds the
    weights of DoF d (human DoFs first). ``obs_noise`` holds per-DoF
    observation noise variances.
    """
    layout: InteractionLayout
    basis: BasisSystem
    weight_mean: np.ndarray
    weight_cov: np.ndarray
    obs_noise: np.ndarray
    phase: PhaseModel
    n_demos: int

    def __post_init__(self):
        mu = np.asarray(self.weight_mean, dtype=np.float64)
        cov = np.asarray(self.weight_cov, dtype=np.float64)
        noise = np.asarray(self.obs_noise, dtype=np.float64)
        dim = self.layout.total_dofs * self.basis.n_basis
        if mu.shape != (dim,):
            raise SchemaError(f"weight mean must have shape ({dim},)")
        if cov.shape != (dim, dim):
            raise SchemaError(f"weight covariance must be {dim}x{dim}")
        if np.max(np.abs(cov - cov.T)) > 1e-9:
            raise NumericalError("weight covariance is not symmetric")
        if noise.shape != (self.layout.total_dofs,):
            raise SchemaError("need one observation noise entry per DoF")
        if np.any(noise <= 0):
            raise ConfigError("observation noise entries must be positive")
        if self.n_demos < 2:
            raise ConfigError("a weight covariance requires at least 2 demos")
        object.__setattr__(self, "weight_mean", mu)
        object.__setattr__(self, "weight_cov", cov)
        object.__setattr__(self, "obs_noise", noise)

    @property
    def weight_dim(self):
        return self.weight_mean.shape[0]

    def mean_blocks(self) -> np.ndarray:
        """Weight means as (D, N)."""
        return self.weight_mean.reshape(self.layout.total_dofs,
                                        self.basis.n_basis)

    def cov_blocks(self) -> np.ndarray:
        """Weight covariance as (D, N, D, N)."""
        n = self.basis.n_basis
        d = self.layout.total_dofs
        return self.weight_cov.reshape(d, n, d, n)

    def human_blocks(self):
        """(mu, cov, noise) restricted to the human DoFs, contiguous."""
        p = self.layout.human_dofs
        mu = np.ascontiguousarray(self.mean_blocks()[:p])
        cov = np.ascontiguousarray(self.cov_blocks()[:p, :, :p, :])
        return mu, cov, np.ascontiguousarray(self.obs_noise[:p])

    def check_psd(self, tol=-1e-8) -> bool:
        """Eigenvalue check used by tests and after fitting (not in hot paths)."""
        return bool(np.min(np.linalg.eigvalsh(
            0.5 * (self.weight_cov + self.weight_cov.T))) > tol)


def fit_weights(traj: Trajectory, basis: BasisSystem, ridge: float = 0.0
                ) -> np.ndarray:
    """Per-DoF least-squares basis weights, stacked DoF-major.

    Solves (Psi^T Psi + ridge I) w = Psi^T y per DoF on the normalized-time
    design. With ridge disabled a rank-deficient design raises instead of
    returning NaNs.
    """
    z = traj.timestamps / traj.duration
    psi = design_matrix(basis, z)
    gram = psi.T @ psi
    if ridge > 0:
        gram = gram + ridge * np.eye(basis.n_basis)
    try:
        c = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"design matrix is rank deficient (T={traj.n_samples}, "
            f"N={basis.n_basis}); enable ridge regularization") from exc
    w = cho_solve(c, psi.T @ traj.samples)
    if not np.all(np.isfinite(w)):
        raise NumericalError("weight solve produced non-finite values")
    return w.T.reshape(-1)


def reconstruct(basis: BasisSystem, weights: np.ndarray, z_values,
                n_dofs: int) -> np.ndarray:
    """Evaluate the basis expansion of stacked weights on a phase grid."""
    psi = design_matrix(basis, z_values)
    w = np.asarray(weights, dtype=np.float64).reshape(n_dofs, basis.n_basis)
    return psi @ w.T


def fit_model(demos, layout: InteractionLayout, basis: BasisSystem,
              nominal_duration: float, *, grid_size: int | None = None,
              ridge: float = 0.0, jitter: float = 1e-6,
              shrinkage: float = 0.05, obs_noise=1e-4,
              sigma_alpha_floor: float = 1e-3, grid_points: int = 61,
              grid_span_sigmas: float = 3.0) -> PrompModel:
    """Learn the weight-space Gaussian of one task from full demonstrations.

    Each demo is resampled onto a common phase grid, fit per DoF, and the
    per-demo weight vectors give the sample mean and covariance. The sample
    covariance is shrunk toward its diagonal (it is rank deficient whenever
    demos are fewer than weights) and a diagonal jitter is added. Duration
    statistics go to the phase model.
    """
    if len(demos) < 2:
        raise ConfigError(f"need at least 2 demonstrations, got {len(demos)}")
    if not (nominal_duration > 0):
        raise ConfigError("nominal_duration must be positive")
    if not (0.0 <= shrinkage <= 1.0):
        raise ConfigError("shrinkage must lie in [0, 1]")
    for demo in demos:
        if demo.dof_kind != DOF_KIND_FULL:
            raise ConfigError("fit_model expects full demonstrations")
        if demo.n_dofs != layout.total_dofs:
            raise SchemaError(
                f"demo has {demo.n_dofs} DoFs, layout expects "
                f"{layout.total_dofs}")

    if grid_size is None:
        grid_size = max(2 * basis.n_basis, int(round(nominal_duration * 50)))

    weights = np.stack([
        fit_weights(resample_trajectory(demo, grid_size), basis, ridge=ridge)
        for demo in demos])
    mu = weights.mean(axis=0)
    centered = weights - mu
    cov = centered.T @ centered / (len(demos) - 1)
    if shrinkage > 0:
        cov = (1.0 - shrinkage) * cov + shrinkage * np.diag(np.diag(cov))
    cov = cov + jitter * np.eye(cov.shape[0])
    cov = 0.5 * (cov + cov.T)

    noise = np.broadcast_to(np.asarray(obs_noise, dtype=np.float64),
                            (layout.total_dofs,)).copy()
    durations = np.array([demo.duration for demo in demos])
    phase = fit_phase(durations, nominal_duration,
                      sigma_floor=sigma_alpha_floor, grid_points=grid_points,
                      grid_span_sigmas=grid_span_sigmas)
    return PrompModel(layout=layout, basis=basis, weight_mean=mu,
                      weight_cov=cov, obs_noise=noise, phase=phase,
                      n_demos=len(demos))


def marginal(model: PrompModel, z: float):
    """Mean and covariance over all DoFs at one phase (noise included)."""
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"phase must lie in [0, 1], got {z}")
    psi = evaluate(model.basis, z)
    mean = model.mean_blocks() @ psi
    cov = np.einsum("anbm,n,m->ab", model.cov_blocks(), psi, psi,
                    optimize=True)
    cov = cov + np.diag(model.obs_noise)
    return mean, 0.5 * (cov + cov.T)


def _observation_matrix(model: PrompModel, z_indices: np.ndarray) -> np.ndarray:
    """Stacked human-rows-only observation matrix, sample-major ordering.

    Row j * P + d maps the weights of human DoF d through the basis row at
    z_indices[j]; robot weights never enter (their rows are identically zero
    and are simply omitted).
    """
    p = model.layout.human_dofs
    n = model.basis.n_basis
    psi = design_matrix(model.basis, z_indices)
    s = z_indices.shape[0]
    h = np.zeros((s * p, model.weight_dim))
    for d in range(p):
        h[d::p, d * n:(d + 1) * n] = psi
    return h


def _resolve_obs_noise(model: PrompModel, obs_noise):
    p = model.layout.human_dofs
    if obs_noise is None:
        return np.asarray(model.obs_noise[:p], dtype=np.float64)
    arr = np.broadcast_to(np.asarray(obs_noise, dtype=np.float64), (p,))
    if np.any(arr <= 0):
        raise ConfigError("observation noise must be positive")
    return np.asarray(arr)


def condition(model: PrompModel, obs: ObservationBatch | None,
              obs_noise=None, mode: str = "joint") -> PrompModel:
    """Posterior weight distribution given a remapped human observation batch.

    One joint Kalman step over the window's stacked samples by default;
    ``mode="sequential"`` applies per-sample updates instead (equivalent for
    this linear-Gaussian model, kept for debugging).
    """
    if obs is None or obs.n_samples == 0:
        return model
    if obs.z_indices is None:
        raise DomainError("observation batch must be phase-remapped first")
    if obs.values.shape[1] != model.layout.human_dofs:
        raise SchemaError(
            f"observation has {obs.values.shape[1]} DoFs, expected "
            f"{model.layout.human_dofs} human DoFs")
    noise = _resolve_obs_noise(model, obs_noise)
    if mode == "joint":
        groups = [(obs.z_indices, obs.values)]
    elif mode == "sequential":
        groups = [(obs.z_indices[j:j + 1], obs.values[j:j + 1])
                  for j in range(obs.n_samples)]
    else:
        raise ConfigError(f"unknown conditioning mode {mode!r}")

    p = model.layout.human_dofs
    mu = model.weight_mean.copy()
    cov = model.weight_cov.copy()
    for z_vals, values in groups:
        h = _observation_matrix(model, z_vals)
        y = values.reshape(-1)
        cov_ht = cov @ h.T
        innov_cov = h @ cov_ht + np.diag(np.tile(noise, z_vals.shape[0]))
        try:
            c = cho_factor(innov_cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "singular innovation covariance during conditioning "
                f"(s={z_vals.shape[0]}, P={p}); increase observation noise"
            ) from exc
        gain = cho_solve(c, cov_ht.T).T
        mu = mu + gain @ (y - h @ mu)
        cov = cov - gain @ cov_ht.T
        cov = 0.5 * (cov + cov.T)
    return replace(model, weight_mean=mu, weight_cov=cov)


def predict_robot(model: PrompModel, z_grid, source_task: str = ""
                  ) -> PredictedDistribution:
    """Robot-block marginals on a phase grid (observation noise included)."""
    z = np.asarray(z_grid, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] == 0:
        raise DomainError("z_grid must be a nonempty 1-D array")
    if np.any(np.diff(z) < 0):
        raise DomainError("z_grid must be sorted")
    p = model.layout.human_dofs
    psi = design_matrix(model.basis, z)
    means = psi @ model.mean_blocks()[p:].T
    rcov = model.cov_blocks()[p:, :, p:, :]
    covs = np.einsum("mn,anbk,mk->mab", psi, rcov, psi, optimize=True)
    covs = covs + np.diag(model.obs_noise[p:])[None, :, :]
    return PredictedDistribution(z_grid=z, means=means, covariances=covs,
                                 source_task=source_task)
