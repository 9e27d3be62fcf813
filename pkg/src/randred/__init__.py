"""randred: randomized dimensionality reduction and risk minimization.

Core surface:

* :mod:`randred.linalg`   -- matrix containers, thin SVD, spectral norm,
  fast Walsh-Hadamard transform, Gram products.
* :mod:`randred.sketch`   -- the rs / rg / srht / rh reduction operators on
  either axis.
* :mod:`randred.subspace` -- sketched-range projectors, approximation
  error, coherence, and the published error/risk bounds.
* :mod:`randred.erm`      -- hinge / softmax risk minimization, the
  reduction training pipelines, metrics, model IO.
* :mod:`randred.datagen`  -- synthetic data and libsvm text IO.
* :mod:`randred.bench`    -- experiment grids, CSV records, verification
  suites (also exposed through the ``randred`` CLI).
"""

from .datagen import Dataset, SyntheticConfig, gen_synthetic, load_libsvm
from .erm import (HINGE, SOFTMAX, ErmProblem, ErmSolution, LossSpec,
                  SolverConfig, TrainedModel, auprc, error_rate, evaluate,
                  load_model, objective_F, objective_bound_check, save_model,
                  solve_dual, solve_primal, train_full, train_nor, train_rp,
                  train_rpdr)
from .linalg import (SpectralEstimate, SvdResult, dense_matrix, fwht, gram,
                     sparse_matrix, spectral_norm, svd_thin)
from .rng import derive_seed, generator
from .sketch import (Axis, DistortionResult, SketchKind, SketchOperator,
                     Variant, apply_features, apply_samples, jl_distortion,
                     make_operator, materialize, operator_config,
                     operator_from_config, selection_operator)
from .subspace import (BoundResult, RiskBoundParams, SpectrumParams,
                       SubspaceProjector, approx_error, approx_error_bound,
                       coherence, excess_risk_bound, projector_direct,
                       projector_fast_sparse, reduce)

__version__ = "0.1.0"
