"""Interaction movement primitives: learning, phase estimation, recognition,
conditioning, and blending for human-robot collaboration."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .basis import BasisSystem, design_matrix, evaluate
from .blending import (ActivationProfile, BlendState, activation,
                       blend_update, continuity_bound, product_step)
from .config import (ExperimentConfig, config_from_dict, default_config,
                     load_config, save_config)
from .errors import (ConfigError, DataContaminationError, DataError,
                     DimensionError, DomainError, IPrompError,
                     NumericalError, SchemaError, SchemaVersionError)
from .io import (Dataset, DemoRecord, dataset_from_demos, export_curves,
                 load_dataset, load_library, load_model, load_prediction,
                 read_records_csv, save_dataset, save_library, save_model,
                 save_prediction, write_aggregate_csv, write_difference_csv,
                 write_records_csv, write_selection_json)
from .metrics import (ErrorReport, ForwardKinematics, MetricConfig,
                      WindowSelection, compute_errors, error_difference,
                      select_window)
from .phase import (AlphaEstimate, ObservationBatch, PhaseModel,
                    build_candidate_grid, candidate_logliks, estimate_alpha,
                    fit_phase, global_times, observation_loglik, remap)
from .pipeline import (FoldFailure, LoocvResult, RunRecord, WindowTrace,
                       aggregate_records, difference_curves, fit_library,
                       run_dynamic, run_loocv, run_static,
                       selections_from_records)
from .promp import (InteractionLayout, PredictedDistribution, PrompModel,
                    Trajectory, condition, fit_model, fit_weights, human_part,
                    marginal, predict_robot, reconstruct, resample_trajectory,
                    robot_part)
from .recognition import RecognitionResult, TaskLibrary, recognize
from .synthgen import (TaskSpec, benchmark_layout, benchmark_specs, generate,
                       make_benchmark, min_jerk_profile)

__version__ = "0.1.0"
