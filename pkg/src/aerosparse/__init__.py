"""Real-time aerodynamic force prediction from sparse surface-pressure sensors.

The pipeline: extract a mean-centered reduced basis from pressure snapshots,
place sensors at greedy interpolation points, fold the basis and geometry into
a precomputed affine force operator, and train a small ReLU network on the gap
between ground-truth and interpolated forces.
"""

from .geometry import (SurfaceGeometry, SnapshotSet, ForceIntegrationMatrix,
                       load_snapshots, write_manifest, scaled_normal_matrix,
                       integrate_force, lift_drag)
from .pod import (ReducedBasis, compute_mean, pod_basis, projection_error,
                  singular_spectrum, save_basis, load_basis)
from .deim import (SensorSelection, deim_select, reconstruction_matrix,
                   save_selection, load_selection)
from .force_model import (LinearForceModel, assemble_force_model, predict_force,
                          reconstruct_pressure, save_model, load_model)
from .correction import (MlpParams, TrainConfig, TrainResult, init_params,
                         mlp_forward, mlp_gradient, AdamState, adam_step,
                         lr_schedule, train, grid_search, predict_corrected,
                         save_mlp, load_mlp)
from .evaluation import (ErrorReport, CoefficientSeries, error_metrics,
                         add_noise, compare_models)
from .synth import (PitchConfig, FidelityConfig, pitching_alpha, ellipse_geometry,
                    generate_dataset, default_benchmark, low_fidelity_config,
                    truth_config)
from .errors import AeroSparseError, DataError, NumericsError, ConfigError

__version__ = "0.1.0"
