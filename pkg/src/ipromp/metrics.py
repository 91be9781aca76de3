"""Prediction quality measures and the observation-window trade-off score.

Three errors per run: Cartesian distance at the final position (through
forward kinematics), RMS joint-space deviation over the phase grid, and the
phase error in seconds. A weighted normalized combination of their means
ranks candidate observation windows.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError, SchemaError
from .promp import PredictedDistribution, Trajectory, robot_part


@dataclass(frozen=True)
class ForwardKinematics:
    """Joint-to-Cartesian map: identity or a planar chain.

    ``passthrough`` treats the joint vector as Cartesian already (for
    synthetic benchmarks whose robot DoFs are positions). ``planar`` folds
    the joints as cumulative angles of a 2-D chain with the given link
    lengths.
    """
    mode: str = "passthrough"
    link_lengths: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("passthrough", "planar"):
            raise ConfigError(f"unknown kinematics mode {self.mode!r}")
        if self.mode == "planar":
            if self.link_lengths is None:
                raise ConfigError("planar kinematics needs link lengths")
            lengths = np.asarray(self.link_lengths, dtype=np.float64)
            if lengths.ndim != 1 or lengths.shape[0] < 1 or np.any(
                    lengths <= 0):
                raise ConfigError("link lengths must be positive")
            object.__setattr__(self, "link_lengths", lengths)

    def cartesian(self, joints):
        q = np.asarray(joints, dtype=np.float64)
        if q.ndim != 1:
            raise SchemaError("expected a single joint vector")
        if not np.all(np.isfinite(q)):
            raise NumericalError("joint vector contains non-finite entries")
        if self.mode == "passthrough":
            return q.copy()
        if q.shape[0] != self.link_lengths.shape[0]:
            raise SchemaError(
                f"{q.shape[0]} joints but {self.link_lengths.shape[0]} links")
        angles = np.cumsum(q)
        pos = np.array([np.sum(self.link_lengths * np.cos(angles)),
                        np.sum(self.link_lengths * np.sin(angles))])
        if not np.all(np.isfinite(pos)):
            raise NumericalError("kinematics produced non-finite position")
        return pos


@dataclass(frozen=True)
class MetricConfig:
    """Weights of the combined window-selection score."""
    gamma_position: float = 1.0 / 3.0
    gamma_joints: float = 1.0 / 3.0
    gamma_phase: float = 1.0 / 3.0

    def __post_init__(self):
        g = (self.gamma_position, self.gamma_joints, self.gamma_phase)
        if any(x < 0 for x in g):
            raise ConfigError("metric weights must be nonnegative")
        if abs(sum(g) - 1.0) > 1e-9:
            raise ConfigError(f"metric weights must sum to 1, got {sum(g)}")


@dataclass(frozen=True)
class ErrorReport:
    """Final-position, joint-space, and phase errors of one run."""
    e_position: float
    e_joints: float
    e_phase: float
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, v in (("e_position", self.e_position),
                        ("e_joints", self.e_joints),
                        ("e_phase", self.e_phase)):
            if not np.isfinite(v) or v < 0:
                raise DataError(f"{name} must be finite and >= 0, got {v}")

    def as_tuple(self):
        return (self.e_position, self.e_joints, self.e_phase)


def _align_ground_truth(predicted: PredictedDistribution,
                        ground_truth: Trajectory, layout) -> np.ndarray:
    """Ground-truth robot samples interpolated onto the prediction grid."""
    if ground_truth.n_dofs == predicted.n_dofs:
        samples = ground_truth.samples
    elif layout is not None and ground_truth.n_dofs == layout.total_dofs:
        samples = robot_part(ground_truth, layout)
    else:
        raise SchemaError(
            f"ground truth has {ground_truth.n_dofs} DoFs; expected "
            f"{predicted.n_dofs} robot DoFs (pass layout for full demos)")
    z_gt = ground_truth.timestamps / ground_truth.duration
    return np.column_stack([
        np.interp(predicted.z_grid, z_gt, samples[:, d])
        for d in range(predicted.n_dofs)])


def compute_errors(predicted: PredictedDistribution,
                   ground_truth: Trajectory, alpha_est: float,
                   alpha_true: float, kinematics: ForwardKinematics,
                   nominal_duration: float, *, layout=None,
                   joint_error_mode: str = "rms",
                   context=None) -> ErrorReport:
    """Errors of a finished run against the held-out demonstration.

    Joint error is the RMS over the phase grid of the per-step joint-space
    L2 deviation; ``joint_error_mode="sum"`` instead accumulates the raw
    per-step norms (grid-size dependent, kept for comparability with
    accumulated-cost reporting).
    """
    if joint_error_mode not in ("rms", "sum"):
        raise ConfigError(f"unknown joint error mode {joint_error_mode!r}")
    if not (nominal_duration > 0):
        raise ConfigError("nominal_duration must be positive")
    if not (alpha_est > 0 and alpha_true > 0):
        raise DataError("temporal scalings must be positive")
    gt = _align_ground_truth(predicted, ground_truth, layout)
    e_position = float(np.linalg.norm(
        kinematics.cartesian(predicted.means[-1])
        - kinematics.cartesian(gt[-1])))
    step_norms = np.linalg.norm(predicted.means - gt, axis=1)
    if joint_error_mode == "rms":
        e_joints = float(np.sqrt(np.mean(step_norms ** 2)))
    else:
        e_joints = float(np.sum(step_norms))
    e_phase = float(abs(alpha_est - alpha_true) * nominal_duration)
    return ErrorReport(e_position=e_position, e_joints=e_joints,
                       e_phase=e_phase, context=dict(context or {}))


def error_difference(static_report: ErrorReport,
                     dynamic_report: ErrorReport):
    """Per-measure static-minus-dynamic differences for one paired fold.

    Positive entries mean the dynamic formulation won. The two reports must
    describe the same fold: any shared context key with differing values
    (other than the formulation itself) is a pairing mistake.
    """
    for key in ("task_id", "fold_id", "experiment"):
        a = static_report.context.get(key)
        b = dynamic_report.context.get(key)
        if a is not None and b is not None and a != b:
            raise DataError(
                f"cannot pair reports: {key} differs ({a!r} vs {b!r})")
    return tuple(s - d for s, d in zip(static_report.as_tuple(),
                                       dynamic_report.as_tuple()))


@dataclass(frozen=True)
class WindowSelection:
    """Outcome of the observation-window trade-off."""
    best_window: float
    scores: dict
    degenerate: bool = False
    tie: bool = False


def select_window(mean_reports: dict, config: MetricConfig
                  ) -> WindowSelection:
    """Pick the window whose normalized weighted error score is smallest.

    ``mean_reports`` maps window duration to the mean ErrorReport over all
    runs at that duration. Each error is normalized by its maximum across
    windows (a measure that is zero everywhere contributes zero), the
    weighted sum is minimized, and ties break toward the shortest window.
    A single candidate or an all-equal score landscape is flagged
    degenerate.
    """
    if not mean_reports:
        raise ConfigError("select_window needs at least one candidate")
    windows = sorted(mean_reports)
    errs = np.array([mean_reports[w].as_tuple() for w in windows])
    maxima = errs.max(axis=0)
    safe = np.where(maxima > 0, maxima, 1.0)
    normalized = errs / safe
    gammas = np.array([config.gamma_position, config.gamma_joints,
                       config.gamma_phase])
    scores = normalized @ gammas
    best_score = scores.min()
    at_best = np.flatnonzero(np.abs(scores - best_score) < 1e-12)
    best = windows[int(at_best[0])]
    degenerate = len(windows) == 1 or bool(
        np.all(np.abs(scores - best_score) < 1e-12) and len(windows) > 1)
    return WindowSelection(best_window=float(best),
                           scores={float(w): float(s)
                                   for w, s in zip(windows, scores)},
                           degenerate=degenerate,
                           tie=at_best.shape[0] > 1)
