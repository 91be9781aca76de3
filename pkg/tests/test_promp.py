import numpy as np
import pytest
from _factories import correlated_model, sine_demo, sine_model, toy_layout

from ipromp import (BasisSystem, ConfigError, InteractionLayout,
                    NumericalError, ObservationBatch, SchemaError, Trajectory,
                    condition, design_matrix, fit_model, fit_weights,
                    human_part, marginal, predict_robot, reconstruct, remap,
                    resample_trajectory, robot_part)


# ---------------------------------------------------------------- weights

def test_fit_weights_matches_lstsq_oracle(rng):
    """Normal-equation solve agrees with an independent lstsq route."""
    basis = BasisSystem.uniform(12)
    t = np.linspace(0.0, 3.0, 80)
    y = rng.normal(0.0, 1.0, (80, 3))
    traj = Trajectory(t, y, "full")
    got = fit_weights(traj, basis).reshape(3, 12)
    phi = design_matrix(basis, t / 3.0)
    want = np.linalg.lstsq(phi, y, rcond=None)[0].T
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-8)


def test_fit_weights_recovers_known_weights(rng):
    basis = BasisSystem.uniform(10)
    w_true = rng.normal(0.0, 1.0, (2, 10))
    t = np.linspace(0.0, 4.0, 200)
    y = design_matrix(basis, t / 4.0) @ w_true.T
    got = fit_weights(Trajectory(t, y, "full"), basis).reshape(2, 10)
    np.testing.assert_allclose(got, w_true, atol=1e-9)


def test_reconstruct_roundtrip(rng):
    basis = BasisSystem.uniform(8)
    w = rng.normal(0.0, 1.0, 16)
    z = np.linspace(0.0, 1.0, 30)
    y = reconstruct(basis, w, z, 2)
    w2 = fit_weights(Trajectory(z * 2.0, y, "full"), basis)
    np.testing.assert_allclose(w2, w, atol=1e-9)


def test_rank_deficient_needs_ridge():
    basis = BasisSystem.uniform(20)
    t = np.linspace(0.0, 1.0, 5)  # fewer samples than basis functions
    y = np.sin(t)[:, None]
    traj = Trajectory(t, y, "full")
    with pytest.raises(NumericalError):
        fit_weights(traj, basis)
    w = fit_weights(traj, basis, ridge=1e-6)
    assert np.all(np.isfinite(w))


# ---------------------------------------------------------------- fitting

def test_fit_model_moments_match_oracle():
    model, demos = sine_model(seed=1)
    basis = model.basis
    per_demo = []
    for demo in demos:
        grid = resample_trajectory(demo, max(2 * basis.n_basis, 200))
        phi = design_matrix(basis, grid.timestamps / grid.duration)
        w = np.linalg.lstsq(phi, grid.samples, rcond=None)[0].T.reshape(-1)
        per_demo.append(w)
    per_demo = np.array(per_demo)
    np.testing.assert_allclose(model.weight_mean, per_demo.mean(axis=0),
                               atol=1e-7)
    raw = np.cov(per_demo.T, ddof=1)
    shrunk = 0.95 * raw + 0.05 * np.diag(np.diag(raw)) + 1e-6 * np.eye(
        raw.shape[0])
    np.testing.assert_allclose(model.weight_cov, shrunk, atol=1e-7)
    assert model.check_psd()
    assert model.n_demos == len(demos)


def test_fit_model_phase_stats():
    model, demos = sine_model(seed=2)
    alphas = np.array([d.duration for d in demos]) / 4.0
    assert model.phase.mean_alpha == pytest.approx(alphas.mean())
    assert model.phase.std_alpha == pytest.approx(alphas.std(ddof=1))
    assert model.phase.nominal_duration == 4.0


def test_fit_model_input_validation(rng):
    layout = toy_layout()
    basis = BasisSystem.uniform(5)
    demo = sine_demo(4.0, rng)
    with pytest.raises(ConfigError):
        fit_model([demo], layout, basis, 4.0)
    with pytest.raises(SchemaError):
        fit_model([demo, Trajectory(demo.timestamps, demo.samples[:, :3],
                                    "full")], layout, basis, 4.0)
    with pytest.raises(ConfigError):
        fit_model([demo, demo], layout, basis, -1.0)


# --------------------------------------------------------------- marginal

def test_marginal_matches_brute_force():
    model = correlated_model(rho=0.5)
    n = model.basis.n_basis
    for z in [0.0, 0.31, 0.74, 1.0]:
        phi_row = np.exp(-(z - model.basis.centers) ** 2
                         / (2 * model.basis.width ** 2))
        phi_row = phi_row / phi_row.sum()
        mu_want = np.empty(2)
        cov_want = np.empty((2, 2))
        for d in range(2):
            mu_want[d] = phi_row @ model.weight_mean[d * n:(d + 1) * n]
            for e in range(2):
                block = model.weight_cov[d * n:(d + 1) * n,
                                         e * n:(e + 1) * n]
                cov_want[d, e] = phi_row @ block @ phi_row
        cov_want += np.diag(model.obs_noise)
        mu, cov = marginal(model, z)
        np.testing.assert_allclose(mu, mu_want, atol=1e-12)
        np.testing.assert_allclose(cov, cov_want, atol=1e-12)


# ------------------------------------------------------------ conditioning

def joint_gaussian_condition_oracle(model, obs_z, obs_y, noise):
    """Textbook Gaussian conditioning on the stacked joint over (w, y)."""
    p = model.layout.human_dofs
    n = model.basis.n_basis
    s = len(obs_z)
    h = np.zeros((s * p, model.weight_mean.shape[0]))
    for j, z in enumerate(obs_z):
        row = np.exp(-(z - model.basis.centers) ** 2
                     / (2 * model.basis.width ** 2))
        if model.basis.normalize:
            row = row / row.sum()
        for d in range(p):
            h[j * p + d, d * n:(d + 1) * n] = row
    sigma = model.weight_cov
    cross = sigma @ h.T
    yy = h @ cross + np.diag(np.tile(noise, s))
    mean_y = h @ model.weight_mean
    inv = np.linalg.inv(yy)
    mu_post = model.weight_mean + cross @ inv @ (obs_y.reshape(-1) - mean_y)
    cov_post = sigma - cross @ inv @ cross.T
    return mu_post, cov_post


def test_condition_matches_joint_gaussian_oracle(rng):
    model = correlated_model(rho=0.7, n_basis=3)
    obs_z = np.array([0.1, 0.35, 0.6])
    obs_y = rng.normal(0.5, 0.4, (3, 1))
    batch = ObservationBatch(obs_z * 4.0, obs_y, window_duration=4.0,
                             z_indices=obs_z, phase_alpha=1.0)
    post = condition(model, batch)
    mu_want, cov_want = joint_gaussian_condition_oracle(
        model, obs_z, obs_y, model.obs_noise[:1])
    np.testing.assert_allclose(post.weight_mean, mu_want, atol=1e-8)
    np.testing.assert_allclose(post.weight_cov, cov_want, atol=1e-8)


def test_condition_shrinks_uncertainty_and_moves_robot(rng):
    model = correlated_model(rho=0.9)
    z = np.linspace(0.05, 0.5, 6)
    y = np.sin(np.pi * z)[:, None] + 0.3  # consistent offset upward
    batch = ObservationBatch(z * 4.0, y, window_duration=4.0, z_indices=z,
                             phase_alpha=1.0)
    post = condition(model, batch)
    assert np.trace(post.weight_cov) < np.trace(model.weight_cov)
    # strong positive weight correlation: robot weights must move with the
    # human evidence, not stay at the prior
    shift = np.abs(post.weight_mean - model.weight_mean)
    n = model.basis.n_basis
    assert shift[n:].max() > 0.05


def test_condition_empty_batch_is_identity():
    model = correlated_model()
    empty = ObservationBatch(np.array([]), np.empty((0, 1)),
                             window_duration=1.0, z_indices=np.array([]))
    post = condition(model, empty)
    assert post is model
    assert condition(model, None) is model


def test_condition_sequential_equals_joint(rng):
    model = correlated_model(rho=0.6, n_basis=7)
    z = np.linspace(0.1, 0.8, 5)
    y = rng.normal(0.0, 0.5, (5, 1))
    batch = ObservationBatch(z * 4.0, y, window_duration=4.0, z_indices=z,
                             phase_alpha=1.0)
    joint = condition(model, batch, mode="joint")
    seq = condition(model, batch, mode="sequential")
    np.testing.assert_allclose(joint.weight_mean, seq.weight_mean, atol=1e-8)
    np.testing.assert_allclose(joint.weight_cov, seq.weight_cov, atol=1e-8)


def test_condition_requires_remap_and_matching_dofs(rng):
    model, _ = sine_model(seed=3, n_demos=4)
    raw = ObservationBatch(np.array([0.1, 0.2]), rng.normal(0, 1, (2, 2)),
                           window_duration=1.0)
    with pytest.raises(Exception) as err:
        condition(model, raw)
    assert "remap" in str(err.value)
    wrong = ObservationBatch(np.array([0.1, 0.2]), rng.normal(0, 1, (2, 3)),
                             window_duration=1.0,
                             z_indices=np.array([0.1, 0.2]))
    with pytest.raises(SchemaError):
        condition(model, wrong)


def test_condition_is_nondestructive():
    model = correlated_model()
    before = model.weight_mean.copy()
    z = np.array([0.2, 0.4])
    batch = ObservationBatch(z * 4.0, np.array([[0.9], [1.2]]),
                             window_duration=4.0, z_indices=z)
    condition(model, batch)
    np.testing.assert_array_equal(model.weight_mean, before)


# ------------------------------------------------------------- prediction

def test_predict_robot_matches_marginal():
    model = correlated_model(rho=0.4)
    grid = np.linspace(0.0, 1.0, 17)
    pred = predict_robot(model, grid, source_task="t")
    assert pred.source_task == "t"
    p = model.layout.human_dofs
    for i, z in enumerate(grid):
        mu, cov = marginal(model, float(z))
        np.testing.assert_allclose(pred.means[i], mu[p:], atol=1e-12)
        np.testing.assert_allclose(pred.covariances[i], cov[p:, p:],
                                   atol=1e-12)


def test_predict_robot_calibration_against_generator(rng):
    """Conditioning on human samples drawn from the model's own weight prior
    must keep the true robot curve inside the 3-sigma band nearly always."""
    model = correlated_model(rho=0.8, n_basis=9, obs_noise=1e-4)
    grid = np.linspace(0.0, 1.0, 60)
    n = model.basis.n_basis
    chol = np.linalg.cholesky(model.weight_cov
                              + 1e-12 * np.eye(2 * n))
    hits = total = 0
    for _ in range(20):
        w = model.weight_mean + chol @ rng.standard_normal(2 * n)
        z_obs = np.linspace(0.02, 0.55, 8)
        phi_obs = design_matrix(model.basis, z_obs)
        y = (phi_obs @ w[:n])[:, None] + rng.normal(0, 1e-2, (8, 1))
        batch = ObservationBatch(z_obs * 4.0, y, window_duration=4.0,
                                 z_indices=z_obs, phase_alpha=1.0)
        post = condition(model, batch, obs_noise=1e-4)
        pred = predict_robot(post, grid)
        truth = design_matrix(model.basis, grid) @ w[n:]
        sd = np.sqrt(pred.covariances[:, 0, 0])
        hits += int(np.sum(np.abs(pred.means[:, 0] - truth) <= 3 * sd))
        total += grid.size
    assert hits / total >= 0.95


def test_predicted_distribution_validation():
    grid = np.linspace(0, 1, 4)
    means = np.zeros((4, 2))
    covs = np.tile(np.eye(2), (4, 1, 1))
    bad = covs.copy()
    bad[2] = [[1.0, 0.5], [-0.5, 1.0]]
    from ipromp import PredictedDistribution
    with pytest.raises(SchemaError):
        PredictedDistribution(grid, means, bad)
    neg = covs.copy()
    neg[1] = [[-1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(NumericalError):
        PredictedDistribution(grid, means, neg)
    with pytest.raises(SchemaError):
        PredictedDistribution(grid, means[:3], covs)


# ------------------------------------------------------------- trajectory

def test_trajectory_validation():
    with pytest.raises(SchemaError):
        Trajectory(np.array([0.1, 0.2]), np.zeros((2, 1)))  # t0 != 0
    with pytest.raises(SchemaError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)))
    with pytest.raises(SchemaError):
        Trajectory(np.array([0.0]), np.zeros((1, 1)))
    with pytest.raises(SchemaError):
        Trajectory(np.array([0.0, 1.0]), np.array([[0.0], [np.nan]]))
    with pytest.raises(SchemaError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((2, 1)), "robot_only")


def test_resample_preserves_endpoints_and_count(rng):
    demo = sine_demo(3.7, rng)
    out = resample_trajectory(demo, 57)
    assert out.n_samples == 57
    assert out.duration == pytest.approx(demo.duration)
    np.testing.assert_allclose(out.samples[0], demo.samples[0])
    np.testing.assert_allclose(out.samples[-1], demo.samples[-1])


def test_human_robot_split(rng):
    layout = toy_layout()
    demo = sine_demo(4.0, rng)
    h = human_part(demo, layout)
    assert h.dof_kind == "human_only"
    assert h.n_dofs == 2
    np.testing.assert_array_equal(h.samples, demo.samples[:, :2])
    r = robot_part(demo, layout)
    np.testing.assert_array_equal(r, demo.samples[:, 2:])
    with pytest.raises(SchemaError):
        human_part(h, layout)


def test_layout_names():
    lay = InteractionLayout(2, 3)
    assert lay.dof_names == ("h0", "h1", "r0", "r1", "r2")
    assert lay.total_dofs == 5
    with pytest.raises(ConfigError):
        InteractionLayout(0, 3)
    with pytest.raises(SchemaError):
        InteractionLayout(1, 1, ("a",))
