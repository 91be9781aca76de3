"""Synthetic human-robot demonstration generator.

Demos are minimum-jerk waypoint interpolations with Gaussian spatial noise
and per-demo random durations, sampled at a fixed rate. Two benchmark
families: tasks that differ over their whole course, and tasks that share a
common prefix and only diverge partway, which is the interesting regime for
early recognition.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError, SchemaError
from .promp import InteractionLayout, Trajectory, resample_trajectory

TOY_LAYOUT = InteractionLayout(2, 2, ("hand_x", "hand_y", "tcp_x", "tcp_y"))
FULL_LAYOUT = InteractionLayout(
    3, 7, ("hand_x", "hand_y", "hand_z") + tuple(
        f"joint_{i}" for i in range(1, 8)))

DEFAULT_RATE = 50.0
DEFAULT_DURATION_MEAN = 4.0
DEFAULT_DURATION_STD = 0.4
DEFAULT_NOISE = 0.05


def min_jerk_profile(u):
    """Smoothstep 10u^3 - 15u^4 + 6u^5: zero velocity and acceleration at
    both ends, unit displacement."""
    u = np.asarray(u, dtype=np.float64)
    return 10.0 * u ** 3 - 15.0 * u ** 4 + 6.0 * u ** 5


@dataclass(frozen=True)
class TaskSpec:
    """Waypoint recipe for one task's demonstrations."""
    task_id: str
    human_waypoints: tuple
    robot_waypoints: tuple
    duration_mean: float = DEFAULT_DURATION_MEAN
    duration_std: float = DEFAULT_DURATION_STD
    spatial_noise: float = DEFAULT_NOISE
    divergence_phase: float | None = None

    def __post_init__(self):
        hw = tuple(np.asarray(w, dtype=np.float64)
                   for w in self.human_waypoints)
        rw = tuple(np.asarray(w, dtype=np.float64)
                   for w in self.robot_waypoints)
        if len(hw) < 2 or len(rw) < 2:
            raise ConfigError("need at least start and goal waypoints")
        if len(hw) != len(rw):
            raise ConfigError(
                "human and robot waypoint counts must match so segment "
                f"boundaries line up ({len(hw)} vs {len(rw)})")
        if len({w.shape for w in hw}) != 1 or len({w.shape for w in rw}) != 1:
            raise SchemaError("waypoints disagree on dimensionality")
        if not (self.duration_mean > 0):
            raise ConfigError("duration_mean must be positive")
        if self.duration_std < 0:
            raise ConfigError("duration_std must be nonnegative")
        noise = np.asarray(self.spatial_noise, dtype=np.float64)
        if np.any(noise < 0):
            raise ConfigError("spatial noise must be nonnegative")
        if self.divergence_phase is not None and not (
                0.0 <= self.divergence_phase <= 1.0):
            raise ConfigError("divergence_phase must lie in [0, 1]")
        object.__setattr__(self, "human_waypoints", hw)
        object.__setattr__(self, "robot_waypoints", rw)

    @property
    def human_dim(self):
        return self.human_waypoints[0].shape[0]

    @property
    def robot_dim(self):
        return self.robot_waypoints[0].shape[0]


def _piecewise_min_jerk(waypoints, z):
    """Waypoint chain evaluated at phases z, equal phase per segment."""
    pts = np.stack(waypoints)
    n_seg = pts.shape[0] - 1
    seg = np.minimum((z * n_seg).astype(int), n_seg - 1)
    u = z * n_seg - seg
    start = pts[seg]
    delta = pts[seg + 1] - pts[seg]
    return start + delta * min_jerk_profile(u)[:, None]


def generate(spec: TaskSpec, n_demos: int, seed: int,
             sample_rate: float = DEFAULT_RATE):
    """Draw demonstrations for one task, deterministic per seed.

    Durations come from the task's Gaussian, redrawn while non-positive
    (or impractically short); each demo is the waypoint interpolation over
    its own time axis plus iid spatial noise on every DoF.
    """
    if n_demos < 1:
        raise ConfigError("n_demos must be >= 1")
    if not (sample_rate > 0):
        raise ConfigError("sample_rate must be positive")
    rng = np.random.default_rng(seed)
    noise = np.broadcast_to(
        np.asarray(spec.spatial_noise, dtype=np.float64),
        (spec.human_dim + spec.robot_dim,))
    demos = []
    for _ in range(n_demos):
        duration = -1.0
        for _ in range(100):
            duration = rng.normal(spec.duration_mean, spec.duration_std)
            if duration > 0.1 * spec.duration_mean:
                break
        else:
            raise NumericalError(
                "could not draw a usable duration; duration_std is too "
                "large relative to duration_mean")
        n = max(2, int(round(duration * sample_rate)))
        t = np.linspace(0.0, duration, n)
        z = t / duration
        human = _piecewise_min_jerk(spec.human_waypoints, z)
        robot = _piecewise_min_jerk(spec.robot_waypoints, z)
        clean = np.hstack([human, robot])
        samples = clean + rng.normal(0.0, 1.0, clean.shape) * noise
        demos.append(Trajectory(t, samples, "full"))
    return demos


# ------------------------------------------------------------ benchmarks

def _toy_specs_distinct():
    start_h, start_r = (0.0, 0.0), (0.8, 0.0)
    return [
        TaskSpec("reach_low",
                 (start_h, (0.3, 0.1), (0.7, 0.2)),
                 (start_r, (0.65, 0.15), (0.55, 0.25))),
        TaskSpec("reach_high",
                 (start_h, (0.15, 0.3), (0.3, 0.7)),
                 (start_r, (0.5, 0.3), (0.25, 0.55))),
        TaskSpec("reach_far",
                 (start_h, (0.35, 0.35), (0.75, 0.7)),
                 (start_r, (0.7, 0.4), (0.6, 0.65))),
    ]


def _toy_specs_diverging():
    prefix_h = ((-0.35, -0.35), (0.0, 0.0))
    prefix_r = ((0.7, 0.7), (0.35, 0.35))
    goals = {
        "branch_right": ((0.45, 0.0), (0.8, 0.35)),
        "branch_left": ((-0.45, 0.0), (-0.1, 0.35)),
        "branch_up": ((0.0, 0.45), (0.35, 0.8)),
        "branch_down": ((0.0, -0.45), (0.35, -0.1)),
    }
    return [TaskSpec(name, prefix_h + (gh,), prefix_r + (gr,),
                     divergence_phase=0.5)
            for name, (gh, gr) in goals.items()]


def _full_specs_distinct():
    start_h = (0.0, 0.0, 0.1)
    start_r = tuple(np.zeros(7))
    mids = {
        "handover_left": ((0.25, 0.3, 0.3), (0.6, 0.55, 0.45),
                          (0.3, -0.2, 0.1, 0.5, -0.1, 0.2, 0.1),
                          (0.6, -0.4, 0.2, 0.9, -0.2, 0.4, 0.2)),
        "handover_center": ((0.05, 0.35, 0.25), (0.05, 0.75, 0.4),
                            (-0.1, 0.3, -0.2, 0.6, 0.1, -0.3, 0.2),
                            (-0.2, 0.6, -0.4, 1.1, 0.2, -0.5, 0.4)),
        "handover_right": ((-0.2, 0.25, 0.35), (-0.5, 0.5, 0.55),
                           (0.4, 0.2, 0.3, -0.4, 0.3, 0.1, -0.3),
                           (0.8, 0.4, 0.6, -0.8, 0.5, 0.2, -0.6)),
    }
    return [TaskSpec(name, (start_h, hm, hg), (start_r, rm, rg))
            for name, (hm, hg, rm, rg) in mids.items()]


def _full_specs_diverging():
    prefix_h = ((-0.3, -0.3, 0.1), (0.0, 0.0, 0.25))
    base = np.array([0.3, -0.2, 0.1, 0.4, -0.1, 0.2, 0.0])
    prefix_r = (tuple(np.zeros(7)), tuple(base))
    deltas = {
        "branch_right": ((0.45, 0.0, 0.25),
                         (0.5, 0.3, -0.2, 0.4, 0.2, -0.1, 0.3)),
        "branch_left": ((-0.45, 0.0, 0.25),
                        (-0.5, -0.3, 0.2, -0.4, -0.2, 0.1, -0.3)),
        "branch_up": ((0.0, 0.0, 0.7),
                      (0.2, -0.5, 0.4, 0.3, -0.4, 0.5, 0.1)),
        "branch_down": ((0.0, 0.0, -0.2),
                        (-0.2, 0.5, -0.4, -0.3, 0.4, -0.5, -0.1)),
    }
    return [TaskSpec(name, prefix_h + (gh,),
                     prefix_r + (tuple(base + np.asarray(dr)),),
                     divergence_phase=0.5)
            for name, (gh, dr) in deltas.items()]


def benchmark_specs(kind: str, profile: str = "toy"):
    """Task recipes of one benchmark family.

    ``kind``: "distinct" (tasks differ throughout) or "diverging" (shared
    prefix, branch at half phase). ``profile``: "toy" (2+2 DoFs) or "full"
    (3+7 DoFs).
    """
    table = {
        ("distinct", "toy"): _toy_specs_distinct,
        ("diverging", "toy"): _toy_specs_diverging,
        ("distinct", "full"): _full_specs_distinct,
        ("diverging", "full"): _full_specs_diverging,
    }
    try:
        specs = table[(kind, profile)]()
    except KeyError:
        raise ConfigError(
            f"unknown benchmark {kind!r}/{profile!r}; kinds are "
            "distinct/diverging, profiles toy/full") from None
    return specs


def benchmark_layout(profile: str) -> InteractionLayout:
    if profile == "toy":
        return TOY_LAYOUT
    if profile == "full":
        return FULL_LAYOUT
    raise ConfigError(f"unknown profile {profile!r}")


def _mean_human_paths(demos_by_task, layout, grid_points=80):
    paths = {}
    for task_id, demos in demos_by_task.items():
        acc = np.zeros((grid_points, layout.human_dofs))
        for demo in demos:
            grid = resample_trajectory(demo, grid_points)
            acc += grid.samples[:, :layout.human_dofs]
        paths[task_id] = acc / len(demos)
    return paths


def check_benchmark_geometry(kind, specs, demos_by_task, layout):
    """Verify the generated set supports its benchmark's premise.

    Distinct tasks must end at well-separated human goals. Diverging tasks
    must additionally share their prefix up to the divergence phase within
    one noise standard deviation of the mean paths.
    """
    noise = float(np.max([np.max(np.atleast_1d(s.spatial_noise))
                          for s in specs]))
    paths = _mean_human_paths(demos_by_task, layout)
    ids = [s.task_id for s in specs]
    goal_floor = (10.0 if kind == "diverging" else 5.0) * noise
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            sep = np.linalg.norm(paths[a][-1] - paths[b][-1])
            if sep < goal_floor:
                raise DataError(
                    f"human goals of {a!r} and {b!r} are only {sep:.4f} "
                    f"apart (need {goal_floor:.4f})")
    if kind == "diverging":
        split = min(s.divergence_phase or 1.0 for s in specs)
        upto = max(2, int((split - 0.1) * next(iter(paths.values())).shape[0]))
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                gap = np.mean(np.linalg.norm(
                    paths[a][:upto] - paths[b][:upto], axis=1))
                if gap > noise:
                    raise DataError(
                        f"prefixes of {a!r} and {b!r} deviate by {gap:.4f} "
                        f"on average before the divergence phase "
                        f"(limit {noise:.4f})")


def make_benchmark(kind: str, profile: str = "toy", n_demos: int | None = None,
                   seed: int = 0, sample_rate: float = DEFAULT_RATE):
    """Generate a complete benchmark: layout, specs, and demos per task.

    The geometry checks run on the finished set; a failing draw is retried
    on a shifted sub-seed a few times before giving up.
    """
    specs = benchmark_specs(kind, profile)
    layout = benchmark_layout(profile)
    if n_demos is None:
        n_demos = 10 if profile == "toy" else 20
    last_err = None
    for attempt in range(3):
        demos_by_task = {
            spec.task_id: generate(spec, n_demos,
                                   seed + 1000 * attempt + 17 * i,
                                   sample_rate=sample_rate)
            for i, spec in enumerate(specs)}
        try:
            check_benchmark_geometry(kind, specs, demos_by_task, layout)
            return layout, specs, demos_by_task
        except DataError as err:
            last_err = err
    raise DataError(
        f"benchmark geometry checks failed on 3 seeds: {last_err}")
