"""Dataset, model, and result persistence.

Headers are human-readable JSON; raw sample matrices live in a compact npz
sidecar next to the header by default, or inline as full-precision decimal
text when portability beats file count. Both routes round-trip float64
bit-exactly: npz stores the raw bytes, JSON floats serialize via repr
(shortest decimal that parses back to the same double).

Every writer is atomic (temp file in the target directory, then rename), so
a crashed process never leaves a half-written file behind. Loading validates
the complete file before constructing anything, so a schema error can never
hand back a partial object. See docs/formats.md for the byte layouts.
"""
import contextlib
import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import BasisSystem
from .errors import (DataContaminationError, DataError, DimensionError,
                     IPrompError, SchemaError, SchemaVersionError)
from .metrics import ErrorReport
from .phase import PhaseModel
from .pipeline import RunRecord
from .promp import (InteractionLayout, PredictedDistribution, PrompModel,
                    Trajectory)
from .recognition import TaskLibrary

SCHEMA_VERSION = 1

KIND_DATASET = "dataset"
KIND_MODEL = "promp_model"
KIND_LIBRARY = "task_library"


# ---------------------------------------------------------------- plumbing

def _atomic_write(path, writer, mode="w"):
    """Write through a temp file in the destination directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            writer(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _read_json(path, what):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}") from None
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{what} file {path} is not valid JSON: {exc}"
                          ) from None
    if not isinstance(raw, dict):
        raise SchemaError(f"{what} file {path} must hold a JSON object")
    return raw


def _check_version(raw, path, kind):
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path} declares schema_version {version!r}; this build "
            f"supports {SCHEMA_VERSION}")
    found = raw.get("kind")
    if found != kind:
        raise SchemaError(f"{path} holds a {found!r} file, expected {kind!r}")


def _field(raw, name, path):
    if name not in raw:
        raise SchemaError(f"{path} is missing required field {name!r}")
    return raw[name]


def _finite_array(values, name, path, ndim):
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: {name} is not numeric") from None
    if arr.ndim != ndim:
        raise DimensionError(
            f"{path}: {name} must be {ndim}-dimensional, got shape "
            f"{arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataContaminationError(
            f"{path}: {name} contains non-finite values")
    return arr


def _load_sidecar(raw, path):
    """Arrays from the npz next to the header, or None for inline files."""
    name = raw.get("sidecar")
    if name is None:
        return None
    sidecar_path = Path(path).parent / str(name)
    try:
        with np.load(sidecar_path) as npz:
            return {key: np.array(npz[key]) for key in npz.files}
    except FileNotFoundError:
        raise DataError(
            f"{path} references sidecar {name!r} which does not exist"
            ) from None
    except (OSError, ValueError) as exc:
        raise SchemaError(
            f"sidecar {sidecar_path} is not a readable npz archive: {exc}"
            ) from None


def _demo_arrays(entry, index, sidecar, path):
    """(timestamps, samples) of one demo, from sidecar keys or inline."""
    if sidecar is not None:
        tk, sk = f"times_{index:05d}", f"samples_{index:05d}"
        missing = [k for k in (tk, sk) if k not in sidecar]
        if missing:
            raise SchemaError(
                f"{path}: sidecar is missing arrays {missing} for demo "
                f"{index}")
        return sidecar[tk], sidecar[sk]
    return (_field(entry, "timestamps", path),
            _field(entry, "samples", path))


def _sidecar_name(path):
    return Path(path).stem + ".npz"


def _write_npz(path, arrays):
    _atomic_write(path, lambda fh: np.savez(fh, **arrays), mode="wb")


def write_json(path, payload):
    """Atomic JSON dump; floats keep full precision via repr."""
    _atomic_write(
        path, lambda fh: (json.dump(payload, fh, indent=1), fh.write("\n")))


# ---------------------------------------------------------------- datasets

@dataclass(frozen=True)
class DemoRecord:
    """One stored demonstration plus its acquisition metadata."""
    task_id: str
    duration_s: float
    sample_rate_hz: float
    trajectory: Trajectory


@dataclass(frozen=True)
class Dataset:
    """Demonstration collection sharing one DoF layout.

    ``units`` declares the physical unit of every DoF, human block first,
    in layout order.
    """
    layout: InteractionLayout
    units: tuple
    demos: tuple
    name: str = ""

    def __post_init__(self):
        units = tuple(str(u) for u in self.units)
        if len(units) != self.layout.total_dofs:
            raise DimensionError(
                f"need one unit per DoF: {len(units)} units for "
                f"{self.layout.total_dofs} DoFs")
        demos = tuple(self.demos)
        for demo in demos:
            if demo.trajectory.n_dofs != self.layout.total_dofs:
                raise DimensionError(
                    f"demo of task {demo.task_id!r} has "
                    f"{demo.trajectory.n_dofs} DoFs, layout expects "
                    f"{self.layout.total_dofs}")
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "demos", demos)

    @property
    def n_demos(self):
        return len(self.demos)

    @property
    def task_ids(self):
        return tuple(sorted({d.task_id for d in self.demos}))

    def by_task(self):
        """Trajectories grouped by task id, insertion order preserved."""
        out = {}
        for demo in self.demos:
            out.setdefault(demo.task_id, []).append(demo.trajectory)
        return out


def dataset_from_demos(layout, demos_by_task, sample_rate_hz, units=None,
                       name=""):
    """Wrap generator output into a persistable dataset."""
    if units is None:
        units = ("m",) * layout.human_dofs + ("rad",) * layout.robot_dofs
    records = []
    for task_id in sorted(demos_by_task):
        for traj in demos_by_task[task_id]:
            records.append(DemoRecord(task_id, traj.duration,
                                      float(sample_rate_hz), traj))
    return Dataset(layout, units, tuple(records), name=name)


def save_dataset(dataset: Dataset, path, sidecar=True):
    """Write a dataset header (JSON) plus optional npz sample sidecar.

    With ``sidecar=False`` the sample matrices go inline as full-precision
    decimal text; both forms load back bit-identically.
    """
    path = Path(path)
    layout = dataset.layout
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": KIND_DATASET,
        "name": dataset.name,
        "layout": {
            "human_dofs": layout.human_dofs,
            "robot_dofs": layout.robot_dofs,
            "dof_names": list(layout.dof_names),
            "units": list(dataset.units),
        },
        "demos": [],
    }
    arrays = {}
    for i, demo in enumerate(dataset.demos):
        traj = demo.trajectory
        entry = {
            "task_id": demo.task_id,
            "duration_s": float(demo.duration_s),
            "sample_rate_hz": float(demo.sample_rate_hz),
            "n_samples": int(traj.n_samples),
        }
        if sidecar:
            arrays[f"times_{i:05d}"] = traj.timestamps
            arrays[f"samples_{i:05d}"] = traj.samples
        else:
            entry["timestamps"] = [float(v) for v in traj.timestamps]
            entry["samples"] = [[float(v) for v in row]
                                for row in traj.samples]
        header["demos"].append(entry)
    if sidecar:
        header["sidecar"] = _sidecar_name(path)
        _write_npz(path.parent / header["sidecar"], arrays)
    write_json(path, header)
    return path


def load_dataset(path) -> Dataset:
    """Load and fully validate a dataset file.

    Validation is total: schema version first, then layout, then every
    demo's declared metadata against its stored arrays. Any mismatch raises
    before a Dataset exists, so callers never see partial loads. Distinct
    failure kinds raise distinct types: unsupported version, dimension
    disagreement, and non-finite contamination each have their own.
    """
    raw = _read_json(path, "dataset")
    _check_version(raw, path, KIND_DATASET)

    layout_raw = _field(raw, "layout", path)
    if not isinstance(layout_raw, dict):
        raise SchemaError(f"{path}: layout must be an object")
    try:
        p = int(_field(layout_raw, "human_dofs", path))
        q = int(_field(layout_raw, "robot_dofs", path))
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: DoF counts must be integers") from None
    if p < 1 or q < 1:
        raise SchemaError(f"{path}: DoF counts must be >= 1, got P={p} Q={q}")
    names = _field(layout_raw, "dof_names", path)
    units = _field(layout_raw, "units", path)
    for label, seq in (("dof_names", names), ("units", units)):
        if not isinstance(seq, list) or not all(
                isinstance(v, str) for v in seq):
            raise SchemaError(f"{path}: layout.{label} must be a list of "
                              "strings")
        if len(seq) != p + q:
            raise DimensionError(
                f"{path}: layout.{label} lists {len(seq)} entries for "
                f"{p + q} DoFs")

    demos_raw = _field(raw, "demos", path)
    if not isinstance(demos_raw, list):
        raise SchemaError(f"{path}: demos must be a list")
    sidecar = _load_sidecar(raw, path)

    staged = []
    for i, entry in enumerate(demos_raw):
        where = f"{path} demo {i}"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: demo entries must be objects")
        task_id = _field(entry, "task_id", where)
        if not isinstance(task_id, str) or not task_id:
            raise SchemaError(f"{where}: task_id must be a non-empty string")
        try:
            duration = float(_field(entry, "duration_s", where))
            rate = float(_field(entry, "sample_rate_hz", where))
        except (TypeError, ValueError):
            raise SchemaError(
                f"{where}: duration_s and sample_rate_hz must be numbers"
                ) from None
        if not (duration > 0) or not (rate > 0):
            raise SchemaError(
                f"{where}: duration_s and sample_rate_hz must be positive")
        times_raw, samples_raw = _demo_arrays(entry, i, sidecar, where)
        times = _finite_array(times_raw, "timestamps", where, ndim=1)
        samples = _finite_array(samples_raw, "samples", where, ndim=2)
        if samples.shape[1] != p + q:
            raise DimensionError(
                f"{where}: samples are {samples.shape[1]} wide but the "
                f"layout declares P+Q={p + q} DoFs")
        if samples.shape[0] != times.shape[0]:
            raise DimensionError(
                f"{where}: {times.shape[0]} timestamps for "
                f"{samples.shape[0]} sample rows")
        declared = _field(entry, "n_samples", where)
        if declared != times.shape[0]:
            raise DimensionError(
                f"{where}: header declares {declared} samples, arrays hold "
                f"{times.shape[0]}")
        if abs(times.shape[0] - duration * rate) > 1.0 + 1e-6:
            raise DimensionError(
                f"{where}: {times.shape[0]} samples is inconsistent with "
                f"duration_s*sample_rate_hz = {duration * rate:.2f} "
                "(tolerance one sample)")
        staged.append((task_id, duration, rate, times, samples))

    try:
        layout = InteractionLayout(p, q, tuple(names))
        demos = tuple(
            DemoRecord(task_id, duration, rate,
                       Trajectory(times, samples, "full"))
            for task_id, duration, rate, times, samples in staged)
        return Dataset(layout, tuple(units), demos,
                       name=str(raw.get("name", "")))
    except IPrompError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ------------------------------------------------------------------ models

def _model_header(model: PrompModel):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": KIND_MODEL,
        "layout": {
            "human_dofs": model.layout.human_dofs,
            "robot_dofs": model.layout.robot_dofs,
            "dof_names": list(model.layout.dof_names),
        },
        "basis": {
            "n_basis": model.basis.n_basis,
            "width": float(model.basis.width),
            "normalize": bool(model.basis.normalize),
        },
        "phase": {
            "mean_alpha": float(model.phase.mean_alpha),
            "std_alpha": float(model.phase.std_alpha),
            "nominal_duration": float(model.phase.nominal_duration),
            "floored": bool(model.phase.floored),
        },
        "n_demos": int(model.n_demos),
    }


_MODEL_ARRAYS = ("basis_centers", "candidate_grid", "weight_mean",
                 "weight_cov", "obs_noise")


def save_model(model: PrompModel, path, sidecar=True):
    """Write one task primitive: JSON header + arrays (npz or inline)."""
    path = Path(path)
    header = _model_header(model)
    arrays = {
        "basis_centers": model.basis.centers,
        "candidate_grid": model.phase.candidate_grid,
        "weight_mean": model.weight_mean,
        "weight_cov": model.weight_cov,
        "obs_noise": model.obs_noise,
    }
    if sidecar:
        header["sidecar"] = _sidecar_name(path)
        _write_npz(path.parent / header["sidecar"], arrays)
    else:
        header["arrays"] = {
            name: (arr.tolist()) for name, arr in arrays.items()}
    write_json(path, header)
    return path


def load_model(path) -> PrompModel:
    """Load one task primitive, validating shapes before construction."""
    raw = _read_json(path, "model")
    _check_version(raw, path, KIND_MODEL)
    sidecar = _load_sidecar(raw, path)
    if sidecar is None:
        inline = _field(raw, "arrays", path)
        if not isinstance(inline, dict):
            raise SchemaError(f"{path}: arrays must be an object")
        source = inline
    else:
        source = sidecar
    missing = [name for name in _MODEL_ARRAYS if name not in source]
    if missing:
        raise SchemaError(f"{path}: missing stored arrays {missing}")

    layout_raw = _field(raw, "layout", path)
    basis_raw = _field(raw, "basis", path)
    phase_raw = _field(raw, "phase", path)
    for label, sub in (("layout", layout_raw), ("basis", basis_raw),
                       ("phase", phase_raw)):
        if not isinstance(sub, dict):
            raise SchemaError(f"{path}: {label} must be an object")

    centers = _finite_array(source["basis_centers"], "basis_centers", path, 1)
    grid = _finite_array(source["candidate_grid"], "candidate_grid", path, 1)
    mean = _finite_array(source["weight_mean"], "weight_mean", path, 1)
    cov = _finite_array(source["weight_cov"], "weight_cov", path, 2)
    noise = _finite_array(source["obs_noise"], "obs_noise", path, 1)

    try:
        p = int(_field(layout_raw, "human_dofs", path))
        q = int(_field(layout_raw, "robot_dofs", path))
        n_basis = int(_field(basis_raw, "n_basis", path))
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: DoF and basis counts must be integers"
                          ) from None
    dim = (p + q) * n_basis
    if centers.shape[0] != n_basis:
        raise DimensionError(
            f"{path}: {centers.shape[0]} centers for n_basis={n_basis}")
    if mean.shape != (dim,) or cov.shape != (dim, dim):
        raise DimensionError(
            f"{path}: weight arrays {mean.shape}/{cov.shape} do not match "
            f"(P+Q)*n_basis = {dim}")
    if noise.shape[0] != p + q:
        raise DimensionError(
            f"{path}: {noise.shape[0]} noise entries for {p + q} DoFs")

    try:
        layout = InteractionLayout(
            p, q, tuple(_field(layout_raw, "dof_names", path)))
        basis = BasisSystem(
            n_basis, centers, float(_field(basis_raw, "width", path)),
            bool(_field(basis_raw, "normalize", path)))
        phase = PhaseModel(
            float(_field(phase_raw, "mean_alpha", path)),
            float(_field(phase_raw, "std_alpha", path)),
            float(_field(phase_raw, "nominal_duration", path)),
            grid, floored=bool(phase_raw.get("floored", False)))
        return PrompModel(layout, basis, mean, cov, noise, phase,
                          int(_field(raw, "n_demos", path)))
    except IPrompError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def save_library(library: TaskLibrary, directory, sidecar=True):
    """Write a task library as a directory of models plus a manifest.

    The manifest lands last, after every model file, so a readable manifest
    implies a complete library on disk.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (task_id, model) in enumerate(zip(library.task_ids,
                                             library.models)):
        filename = f"model_{i:03d}.json"
        save_model(model, directory / filename, sidecar=sidecar)
        entries.append({
            "task_id": task_id,
            "prior": float(library.priors[i]),
            "file": filename,
        })
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": KIND_LIBRARY,
        "tasks": entries,
    }
    write_json(directory / "library.json", manifest)
    return directory


def load_library(directory) -> TaskLibrary:
    """Load a library directory written by save_library."""
    directory = Path(directory)
    raw = _read_json(directory / "library.json", "library")
    _check_version(raw, directory / "library.json", KIND_LIBRARY)
    entries = _field(raw, "tasks", directory / "library.json")
    if not isinstance(entries, list) or not entries:
        raise SchemaError(f"{directory}: manifest lists no tasks")
    named, priors = [], []
    for entry in entries:
        if not isinstance(entry, dict):
            raise SchemaError(f"{directory}: task entries must be objects")
        where = directory / "library.json"
        model = load_model(directory / str(_field(entry, "file", where)))
        named.append((str(_field(entry, "task_id", where)), model))
        priors.append(float(_field(entry, "prior", where)))
    try:
        return TaskLibrary(tuple(t for t, _ in named),
                           tuple(m for _, m in named),
                           np.asarray(priors, dtype=np.float64))
    except IPrompError as exc:
        raise SchemaError(f"{directory}: {exc}") from None


# ----------------------------------------------------------------- results

def _fmt(value):
    """CSV cell text. Floats use repr so they parse back bit-identically."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _write_csv(path, columns, rows):
    def writer(fh):
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([_fmt(v) for v in row])
    _atomic_write(path, writer)
    return path


AGGREGATE_COLUMNS = ("experiment", "formulation", "window", "task",
                     "n_runs", "recognition_rate", "e_position", "e_joints",
                     "e_phase")

RECORD_COLUMNS = ("experiment", "task_id", "fold_id", "formulation",
                  "window", "recognized_task", "recognition_correct",
                  "alpha_true", "alpha_est", "n_windows", "n_empty_windows",
                  "n_samples_used", "e_position", "e_joints", "e_phase")

CURVE_COLUMNS = ("experiment", "task_id", "fold_id", "formulation",
                 "window", "window_index", "end_time", "n_new_samples",
                 "recognized_task", "alpha_window", "alpha_running",
                 "jump", "jump_bound")


def write_aggregate_csv(rows, path):
    """Aggregate rows (see the pipeline's aggregator) as deterministic CSV.

    Wall-clock columns are deliberately dropped: equal inputs must produce
    byte-identical files.
    """
    return _write_csv(path, AGGREGATE_COLUMNS,
                      [[row[c] for c in AGGREGATE_COLUMNS] for row in rows])


def _record_sort_key(r):
    return (r.experiment, r.formulation, r.window, r.task_id, r.fold_id)


def write_records_csv(records, path):
    """One row per run with its error measures, sorted, timing omitted."""
    rows = []
    for r in sorted(records, key=_record_sort_key):
        err = r.error
        rows.append([
            r.experiment, r.task_id, r.fold_id, r.formulation, r.window,
            r.recognized_task, r.recognition_correct, r.alpha_true,
            r.alpha_est, r.n_windows, r.n_empty_windows, r.n_samples_used,
            err.e_position if err else None,
            err.e_joints if err else None,
            err.e_phase if err else None,
        ])
    return _write_csv(path, RECORD_COLUMNS, rows)


def read_records_csv(path):
    """Rebuild lightweight run records from a records CSV.

    The result carries everything aggregation and window selection need
    (identity, recognition, errors); predictions and traces are not
    persisted in CSV form.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path} is empty") from None
            if tuple(header) != RECORD_COLUMNS:
                raise SchemaError(
                    f"{path} does not look like a records CSV (header "
                    f"{header[:3]}...)")
            body = list(reader)
    except FileNotFoundError:
        raise DataError(f"records file not found: {path}") from None
    records = []
    for line_no, row in enumerate(body, start=2):
        if len(row) != len(RECORD_COLUMNS):
            raise SchemaError(
                f"{path}:{line_no} has {len(row)} cells, expected "
                f"{len(RECORD_COLUMNS)}")
        cell = dict(zip(RECORD_COLUMNS, row))
        try:
            error = None
            if cell["e_position"]:
                error = ErrorReport(float(cell["e_position"]),
                                    float(cell["e_joints"]),
                                    float(cell["e_phase"]))
            records.append(RunRecord(
                formulation=cell["formulation"],
                window=float(cell["window"]),
                recognized_task=cell["recognized_task"],
                alpha_est=float(cell["alpha_est"]),
                n_windows=int(cell["n_windows"]),
                n_samples_used=int(cell["n_samples_used"]),
                wall_time=0.0,
                experiment=cell["experiment"],
                task_id=cell["task_id"],
                fold_id=int(cell["fold_id"]),
                alpha_true=float(cell["alpha_true"]),
                n_empty_windows=int(cell["n_empty_windows"]),
                error=error,
            ))
        except (ValueError, IPrompError) as exc:
            raise SchemaError(f"{path}:{line_no}: {exc}") from None
    return records


def export_curves(records, path):
    """Per-window trace rows of every run: recognition, phase, blending."""
    rows = []
    for r in sorted(records, key=_record_sort_key):
        for w in r.windows:
            rows.append([
                r.experiment, r.task_id, r.fold_id, r.formulation,
                r.window, w.index, w.end_time, w.n_new_samples, w.task_id,
                w.alpha_star, w.alpha_running, w.jump, w.jump_bound,
            ])
    return _write_csv(path, CURVE_COLUMNS, rows)


DIFFERENCE_COLUMNS = ("experiment", "measure", "static_ratio",
                      "static_mean", "dynamic_window", "dynamic_mean",
                      "difference")


def write_difference_csv(rows, path):
    """Static-vs-dynamic difference curves as deterministic CSV."""
    return _write_csv(path, DIFFERENCE_COLUMNS,
                      [[row[c] for c in DIFFERENCE_COLUMNS]
                       for row in rows])


def save_prediction(prediction: PredictedDistribution, path, sidecar=True):
    """Write a predicted robot distribution: JSON header + arrays."""
    path = Path(path)
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "prediction",
        "source_task": prediction.source_task,
        "n_dofs": int(prediction.n_dofs),
        "n_points": int(prediction.z_grid.shape[0]),
    }
    arrays = {
        "z_grid": prediction.z_grid,
        "means": prediction.means,
        "covariances": prediction.covariances,
    }
    if sidecar:
        header["sidecar"] = _sidecar_name(path)
        _write_npz(path.parent / header["sidecar"], arrays)
    else:
        header["arrays"] = {k: v.tolist() for k, v in arrays.items()}
    write_json(path, header)
    return path


def load_prediction(path) -> PredictedDistribution:
    raw = _read_json(path, "prediction")
    _check_version(raw, path, "prediction")
    source = _load_sidecar(raw, path)
    if source is None:
        source = _field(raw, "arrays", path)
        if not isinstance(source, dict):
            raise SchemaError(f"{path}: arrays must be an object")
    for name in ("z_grid", "means", "covariances"):
        if name not in source:
            raise SchemaError(f"{path}: missing stored array {name!r}")
    z = _finite_array(source["z_grid"], "z_grid", path, 1)
    means = _finite_array(source["means"], "means", path, 2)
    covs = np.asarray(source["covariances"], dtype=np.float64)
    if covs.ndim != 3:
        raise DimensionError(f"{path}: covariances must be 3-dimensional")
    if not np.all(np.isfinite(covs)):
        raise DataContaminationError(f"{path}: covariances contain "
                                     "non-finite values")
    try:
        return PredictedDistribution(z, means, covs,
                                     str(raw.get("source_task", "")))
    except IPrompError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_selection_json(selections, path):
    """Window-selection outcomes per experiment (and pooled), as JSON."""
    payload = {}
    for key in sorted(selections):
        sel = selections[key]
        payload[key] = None if sel is None else {
            "best_window": sel.best_window,
            "scores": {repr(w): sel.scores[w] for w in sorted(sel.scores)},
        }
    write_json(path, {"schema_version": SCHEMA_VERSION,
                       "kind": "window_selection",
                       "selections": payload})
    return path
