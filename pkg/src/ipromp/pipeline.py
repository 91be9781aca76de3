"""Evaluation pipeline: windowed runs over observation streams and the
leave-one-out sweep across synthetic benchmarks.

A run consumes a human-only stream the way the robot would see it: samples
subsampled at a fixed stride, grouped into observation windows, each window
re-estimating phase, re-recognizing the task, conditioning the primitives,
and blending the refreshed robot prediction into the executing one. The
static formulation instead sees a single window covering a fixed fraction
of the interaction.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .basis import BasisSystem
from .blending import ActivationProfile, BlendState, blend_update
from .config import ExperimentConfig
from .errors import ConfigError, DataError, IPrompError
from .metrics import (ErrorReport, ForwardKinematics, MetricConfig,
                      compute_errors, select_window)
from .phase import (ObservationBatch, candidate_logliks, estimate_alpha,
                    observation_loglik, remap)
from .promp import (PredictedDistribution, Trajectory, condition, fit_model,
                    human_part, predict_robot)
from .recognition import TaskLibrary, recognize
from .synthgen import benchmark_layout, make_benchmark

# Benchmarks of one evaluation draw their demos from disjoint seed ranges.
EXPERIMENT_SEED_OFFSETS = {"distinct": 0, "diverging": 100000}

DYNAMIC = "dynamic"
STATIC = "static"


@dataclass(frozen=True)
class WindowTrace:
    """Per-window recognition and blending diagnostics of one run.

    ``alpha_star`` is the recognized task's scaling estimated from this
    window's samples alone; ``alpha_running`` is the argmax of its
    accumulated candidate posterior over all windows so far.
    """
    index: int
    end_time: float
    n_new_samples: int
    task_id: str
    alpha_star: float
    alpha_running: float
    log_posteriors: tuple
    alphas: tuple
    jump: float = 0.0
    jump_bound: float = float("inf")


@dataclass
class RunRecord:
    """One stream pushed through one formulation at one window setting.

    ``final_prediction`` is the last conditioned prediction (what the
    errors score); ``executed`` is the blend of all per-window predictions
    as the robot would have tracked them, kept for smoothness diagnostics.
    """
    formulation: str
    window: float
    recognized_task: str
    alpha_est: float
    n_windows: int
    n_samples_used: int
    wall_time: float
    experiment: str = ""
    task_id: str = ""
    fold_id: int = -1
    alpha_true: float = float("nan")
    n_empty_windows: int = 0
    windows: tuple = ()
    final_prediction: PredictedDistribution | None = None
    executed: PredictedDistribution | None = None
    error: ErrorReport | None = None

    @property
    def recognition_correct(self):
        if not self.task_id:
            return None
        return self.recognized_task == self.task_id


def _subsampled(stream: Trajectory, stride: int):
    keep = np.arange(0, stream.n_samples, stride)
    return stream.timestamps[keep], stream.samples[keep]


def _check_stream(library: TaskLibrary, stream: Trajectory):
    p = library.models[0].layout.human_dofs
    if stream.n_dofs != p:
        raise DataError(
            f"observation stream has {stream.n_dofs} DoFs but the library "
            f"expects {p} human DoFs")


def _kinematics(cfg: ExperimentConfig) -> ForwardKinematics:
    links = None
    if cfg.metrics.link_lengths is not None:
        links = np.asarray(cfg.metrics.link_lengths, dtype=np.float64)
    return ForwardKinematics(cfg.metrics.kinematics, links)


def _log_prior_curve(phase):
    grid = phase.candidate_grid
    return -0.5 * ((grid - phase.mean_alpha) / phase.std_alpha) ** 2


def _sample_loglik_curves(library, times, values, noise):
    """Per-sample candidate log likelihoods, cumulatively summed.

    Entry [k][j] is task k's log likelihood over its candidate grid given
    samples 0..j, each sample scored on its own (a composite likelihood:
    cross-sample weight correlations are dropped). Window grouping cannot
    change these sums, so every window setting shares one phase belief.
    """
    horizon = max(float(times[-1]), 1e-9)
    curves = []
    for model in library.models:
        per_sample = np.stack([
            candidate_logliks(model,
                              ObservationBatch(times[j:j + 1],
                                               values[j:j + 1],
                                               window_duration=horizon),
                              obs_noise=noise)
            for j in range(times.shape[0])])
        curves.append(np.cumsum(per_sample, axis=0))
    return curves


def _grid_argmax(phase, scores):
    """Argmax over the candidate grid, ties resolving toward the prior mean."""
    best = np.flatnonzero(scores == np.max(scores))
    if best.shape[0] > 1:
        idx = int(best[np.argmin(np.abs(phase.candidate_grid[best]
                                        - phase.mean_alpha))])
    else:
        idx = int(best[0])
    return float(phase.candidate_grid[idx])


def run_dynamic(library: TaskLibrary, stream: Trajectory, duration: float,
                cfg: ExperimentConfig, *, experiment: str = "",
                task_id: str = "", fold_id: int = -1,
                alpha_true: float = float("nan")) -> RunRecord:
    """Windowed run: one recognition/conditioning/blending step per window.

    Each window scores only its own samples against the task primitives, so
    short windows genuinely pay for their thin evidence. Memory lives in
    three running quantities: the conditioned posteriors (each window's
    samples folded in once, per task at that task's own scaling estimate),
    the task belief (the window's recognition posterior becomes the next
    window's prior unless ``recognition.sequential`` is off), and a
    per-sample accumulated candidate posterior over the scaling grid whose
    argmax is the run-level phase estimate.

    The record's ``final_prediction`` is the last window's conditioned
    prediction; the blended ``executed`` trajectory and the per-window
    jump diagnostics capture what tracking it would have looked like.
    """
    if not (duration > 0):
        raise ConfigError("dynamic window duration must be positive")
    _check_stream(library, stream)
    t0 = time.perf_counter()
    times, values = _subsampled(stream, cfg.observation.stride)
    t_nom = library.models[0].phase.nominal_duration
    z_grid = np.linspace(0.0, 1.0, cfg.blending.grid_points)
    noise = cfg.observation.noise
    cumulative = cfg.pipeline.conditioning == "cumulative"

    posteriors = dict(zip(library.task_ids, library.models))
    prior_curves = [_log_prior_curve(m.phase) for m in library.models]
    loglik_curves = _sample_loglik_curves(library, times, values, noise)
    task_log_prior = np.log(library.priors)
    state = None
    pred = None
    traces = []
    n_empty = 0
    # ceil, so a stream ending exactly on a boundary closes the last window
    # instead of spawning a one-sample window after it
    n_windows = max(1, int(np.ceil(times[-1] / duration)))
    if n_windows > 1 and (n_windows - 1) * duration > times[-1]:
        n_windows -= 1
    for w in range(n_windows):
        start, end = w * duration, (w + 1) * duration
        new = (times >= start) & (times < end)
        if w == n_windows - 1:
            new = times >= start  # final window keeps the boundary sample
        if not np.any(new):
            n_empty += 1
            continue
        batch = ObservationBatch(times[new] - start, values[new],
                                 window_duration=duration, window_index=w)
        estimates = [estimate_alpha(model, batch, obs_noise=noise)
                     for model in library.models]
        local = np.array([e.alpha_star for e in estimates])
        logliks = np.array([e.log_likelihoods[e.index] for e in estimates])
        if cfg.recognition.shared_alpha:
            shared = float(local[int(np.argmax(logliks))])
            local = np.full_like(local, shared)
            logliks = np.array([
                observation_loglik(model, batch, shared, obs_noise=noise)
                for model in library.models])
        scores = logliks + task_log_prior
        log_post = scores - logsumexp(scores)
        idx = int(np.flatnonzero(log_post == np.max(log_post))[0])
        winner = library.task_ids[idx]
        if cfg.recognition.sequential:
            task_log_prior = log_post

        seen_upto = int(np.flatnonzero(new)[-1])
        alpha_running = _grid_argmax(
            library.models[idx].phase,
            prior_curves[idx] + loglik_curves[idx][seen_upto])

        if cumulative:
            for k, task in enumerate(library.task_ids):
                posteriors[task] = condition(
                    posteriors[task],
                    remap(batch, float(local[k]), t_nom),
                    obs_noise=noise)
            source = posteriors[winner]
        else:
            source = condition(
                library.model_of(winner),
                remap(batch, float(local[idx]), t_nom), obs_noise=noise)
        pred = predict_robot(source, z_grid, source_task=winner)

        jump, bound = 0.0, float("inf")
        if state is None:
            state = BlendState(current=pred)
        else:
            z_now = min(end / (alpha_running * t_nom), 1.0)
            half_step = duration / (2.0 * alpha_running * t_nom)
            profile = ActivationProfile(gradient=cfg.blending.gradient,
                                        switch_time=z_now + half_step)
            state = blend_update(state, pred, profile, now=z_now)
            jump, bound = state.last_jump, state.last_jump_bound
        traces.append(WindowTrace(
            index=w, end_time=end, n_new_samples=int(np.sum(new)),
            task_id=winner, alpha_star=float(local[idx]),
            alpha_running=alpha_running,
            log_posteriors=tuple(float(x) for x in log_post),
            alphas=tuple(float(a) for a in local),
            jump=jump, jump_bound=bound))

    if not traces:
        raise DataError("stream produced no usable observation windows")
    last = traces[-1]
    return RunRecord(
        formulation=DYNAMIC, window=float(duration),
        recognized_task=last.task_id, alpha_est=last.alpha_running,
        n_windows=len(traces), n_samples_used=int(times.shape[0]),
        wall_time=time.perf_counter() - t0, experiment=experiment,
        task_id=task_id, fold_id=fold_id, alpha_true=alpha_true,
        n_empty_windows=n_empty, windows=tuple(traces),
        final_prediction=pred, executed=state.current)


def run_static(library: TaskLibrary, stream: Trajectory, ratio: float,
               cfg: ExperimentConfig, *, experiment: str = "",
               task_id: str = "", fold_id: int = -1,
               alpha_true: float = float("nan")) -> RunRecord:
    """Single-window run observing the first ``ratio`` of the interaction."""
    if not (0.0 < ratio <= 1.0):
        raise ConfigError("static observation ratio must lie in (0, 1]")
    _check_stream(library, stream)
    t0 = time.perf_counter()
    times, values = _subsampled(stream, cfg.observation.stride)
    t_nom = library.models[0].phase.nominal_duration
    cutoff = ratio * stream.duration
    seen = times <= cutoff + 1e-9
    batch = ObservationBatch(times[seen], values[seen],
                             window_duration=max(cutoff, times[seen][-1]
                                                 if np.any(seen) else cutoff),
                             window_index=0)
    rec = recognize(library, batch, obs_noise=cfg.observation.noise,
                    shared_alpha=cfg.recognition.shared_alpha)
    alpha_star = float(rec.alphas[rec.index])
    posterior = condition(library.model_of(rec.task_id),
                          remap(batch, alpha_star, t_nom),
                          obs_noise=cfg.observation.noise)
    z_grid = np.linspace(0.0, 1.0, cfg.blending.grid_points)
    pred = predict_robot(posterior, z_grid, source_task=rec.task_id)
    trace = WindowTrace(
        index=0, end_time=cutoff, n_new_samples=int(np.sum(seen)),
        task_id=rec.task_id, alpha_star=alpha_star,
        alpha_running=alpha_star,
        log_posteriors=tuple(float(x) for x in rec.log_posteriors),
        alphas=tuple(float(a) for a in rec.alphas))
    return RunRecord(
        formulation=STATIC, window=float(ratio),
        recognized_task=rec.task_id, alpha_est=alpha_star, n_windows=1,
        n_samples_used=int(np.sum(seen)),
        wall_time=time.perf_counter() - t0, experiment=experiment,
        task_id=task_id, fold_id=fold_id, alpha_true=alpha_true,
        windows=(trace,), final_prediction=pred)


@dataclass(frozen=True)
class FoldFailure:
    experiment: str
    task_id: str
    fold_id: int
    stage: str
    message: str


@dataclass
class LoocvResult:
    records: list
    failures: list
    selections: dict
    wall_times: dict
    config: ExperimentConfig
    layouts: dict = field(default_factory=dict)


def _fit_task(demos, layout, cfg: ExperimentConfig):
    basis = BasisSystem.uniform(cfg.model.n_basis, overlap=cfg.model.overlap,
                                normalize=cfg.model.normalize)
    return fit_model(
        demos, layout, basis, cfg.nominal_duration,
        grid_size=cfg.model.grid_size, ridge=cfg.model.ridge,
        jitter=cfg.model.jitter, shrinkage=cfg.model.shrinkage,
        obs_noise=cfg.model.train_noise,
        sigma_alpha_floor=cfg.phase.sigma_floor,
        grid_points=cfg.phase.grid_points,
        grid_span_sigmas=cfg.phase.span_sigmas)


def fit_library(demos_by_task, layout, cfg: ExperimentConfig) -> TaskLibrary:
    """Fit one primitive per task and assemble them with uniform priors.

    ``demos_by_task`` maps task id to a list of full demonstrations; tasks
    are ordered by sorted id so equal inputs give identical libraries.
    """
    cfg.validate()
    if not demos_by_task:
        raise ConfigError("cannot fit a library from zero tasks")
    return TaskLibrary.uniform(
        [(task, _fit_task(demos_by_task[task], layout, cfg))
         for task in sorted(demos_by_task)])


def run_loocv(cfg: ExperimentConfig, experiments=None) -> LoocvResult:
    """Leave-one-demo-out evaluation over the configured benchmarks.

    For each held-out demo the library is refit with that demo excluded
    from its own task (other tasks keep all their demos), the demo's human
    block becomes the observation stream, and every configured dynamic
    window duration and static ratio produces one record. Failures skip
    the fold and are reported, not raised.
    """
    cfg.validate()
    experiments = tuple(experiments or cfg.experiments)
    records, failures = [], []
    selections, wall_times, layouts = {}, {}, {}
    kin = _kinematics(cfg)
    for experiment in experiments:
        t0 = time.perf_counter()
        layout, _, demos_by_task = make_benchmark(
            experiment, cfg.profile, cfg.resolved_n_demos(),
            cfg.seed + EXPERIMENT_SEED_OFFSETS[experiment],
            sample_rate=cfg.sample_rate)
        layouts[experiment] = layout
        task_ids = sorted(demos_by_task)
        full_fits = {}
        for task in task_ids:
            full_fits[task] = _fit_task(demos_by_task[task], layout, cfg)
        for task in task_ids:
            demos = demos_by_task[task]
            for fold in range(len(demos)):
                held = demos[fold]
                try:
                    rest = demos[:fold] + demos[fold + 1:]
                    models = [
                        _fit_task(rest, layout, cfg) if t == task
                        else full_fits[t] for t in task_ids]
                    library = TaskLibrary.uniform(list(zip(task_ids,
                                                           models)))
                except IPrompError as err:
                    failures.append(FoldFailure(experiment, task, fold,
                                                "fit", str(err)))
                    continue
                stream = human_part(held, layout)
                alpha_true = held.duration / cfg.nominal_duration
                for duration in cfg.windows.dynamic:
                    _run_and_collect(
                        run_dynamic, library, stream, duration, cfg,
                        experiment, task, fold, alpha_true, held, kin,
                        records, failures)
                for ratio in cfg.windows.static:
                    _run_and_collect(
                        run_static, library, stream, ratio, cfg,
                        experiment, task, fold, alpha_true, held, kin,
                        records, failures)
        wall_times[experiment] = time.perf_counter() - t0
    selections = selections_from_records(records, cfg)
    return LoocvResult(records=records, failures=failures,
                       selections=selections, wall_times=wall_times,
                       config=cfg, layouts=layouts)


def _run_and_collect(runner, library, stream, setting, cfg, experiment,
                     task, fold, alpha_true, held, kin, records, failures):
    try:
        record = runner(library, stream, setting, cfg,
                        experiment=experiment, task_id=task, fold_id=fold,
                        alpha_true=alpha_true)
        layout = library.models[0].layout
        record.error = compute_errors(
            record.final_prediction, held, record.alpha_est, alpha_true,
            kin, cfg.nominal_duration, layout=layout,
            joint_error_mode=cfg.metrics.joint_error,
            context={"experiment": experiment, "task_id": task,
                     "fold_id": fold,
                     "formulation": record.formulation,
                     "window": record.window})
        records.append(record)
    except IPrompError as err:
        failures.append(FoldFailure(experiment, task, fold,
                                    f"{runner.__name__}@{setting}",
                                    str(err)))


ALL_TASKS = "(all)"


def aggregate_records(records):
    """Mean errors and recognition rates per experiment, formulation,
    window, and task, plus an all-tasks row per window.

    Rows come out fully sorted so equal inputs serialize identically.
    """
    groups = {}
    for r in records:
        if r.error is None:
            continue
        for task_key in (r.task_id or ALL_TASKS, ALL_TASKS):
            key = (r.experiment, r.formulation, r.window, task_key)
            groups.setdefault(key, []).append(r)
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2],
                                             k[3] != ALL_TASKS, k[3])):
        experiment, formulation, window, task = key
        bucket = groups[key]
        correct = [r.recognition_correct for r in bucket
                   if r.recognition_correct is not None]
        rows.append({
            "experiment": experiment,
            "formulation": formulation,
            "window": window,
            "task": task,
            "n_runs": len(bucket),
            "recognition_rate": (float(np.mean(correct))
                                 if correct else float("nan")),
            "e_position": float(np.mean([r.error.e_position
                                         for r in bucket])),
            "e_joints": float(np.mean([r.error.e_joints for r in bucket])),
            "e_phase": float(np.mean([r.error.e_phase for r in bucket])),
            "mean_wall_time": float(np.mean([r.wall_time
                                             for r in bucket])),
        })
    return rows


def selections_from_records(records, cfg: ExperimentConfig):
    """Window selection per experiment, plus a pooled entry when several
    experiments contribute records (keyed by the all-tasks marker)."""
    out = {}
    experiments = sorted({r.experiment for r in records})
    for experiment in experiments:
        out[experiment] = _select_from_records(
            [r for r in records if r.experiment == experiment], cfg)
    if len(experiments) > 1:
        out[ALL_TASKS] = _select_from_records(records, cfg)
    return out


ERROR_MEASURES = ("e_position", "e_joints", "e_phase")


def difference_curves(records, selections):
    """Static-minus-dynamic mean error per measure and observation ratio.

    The dynamic side is the experiment's selected window (falling back to
    the pooled selection, then to all dynamic records). Positive
    differences mean the static formulation did worse.
    """
    rows = []
    for experiment in sorted({r.experiment for r in records}):
        scored = [r for r in records
                  if r.experiment == experiment and r.error is not None]
        dynamic = [r for r in scored if r.formulation == DYNAMIC]
        static = [r for r in scored if r.formulation == STATIC]
        if not dynamic or not static:
            continue
        selection = selections.get(experiment) or selections.get(ALL_TASKS)
        if selection is not None:
            at_best = [r for r in dynamic
                       if r.window == selection.best_window]
            dynamic = at_best or dynamic
        dyn_window = dynamic[0].window if selection is None else \
            selection.best_window
        dyn_means = {m: float(np.mean([getattr(r.error, m)
                                       for r in dynamic]))
                     for m in ERROR_MEASURES}
        for ratio in sorted({r.window for r in static}):
            bucket = [r.error for r in static if r.window == ratio]
            for measure in ERROR_MEASURES:
                static_mean = float(np.mean([getattr(e, measure)
                                             for e in bucket]))
                rows.append({
                    "experiment": experiment,
                    "measure": measure,
                    "static_ratio": ratio,
                    "static_mean": static_mean,
                    "dynamic_window": dyn_window,
                    "dynamic_mean": dyn_means[measure],
                    "difference": static_mean - dyn_means[measure],
                })
    return rows


def _select_from_records(records, cfg: ExperimentConfig):
    dynamic = [r for r in records
               if r.formulation == DYNAMIC and r.error is not None]
    if not dynamic:
        return None
    mean_reports = {}
    for window in sorted({r.window for r in dynamic}):
        bucket = [r.error for r in dynamic if r.window == window]
        mean_reports[window] = ErrorReport(
            float(np.mean([e.e_position for e in bucket])),
            float(np.mean([e.e_joints for e in bucket])),
            float(np.mean([e.e_phase for e in bucket])))
    weights = cfg.metrics.weights
    return select_window(mean_reports,
                         MetricConfig(weights[0], weights[1], weights[2]))
