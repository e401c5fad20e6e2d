"""Numerical rank estimation and fixed-precision QB factorization by sketching."""
from .errors import ConfigError, DimensionError, MatrixFormatError, SketchRankError
from .linalg import (QRFactors, coherence, frobenius_norm, jacobi_singular_values, qr_pivoted,
                     qr_thin, singular_values, spectral_norm)
from .rangefinder import (FixedPrecisionConfig, QBFactors, choose_rank_from_bound, qb_error,
                          rangefinder_qb, re_rangefinder)
from .rank import (RankEstimateConfig, RankReport, Status, estimate_rank, estimate_rank_adaptive,
                   gn_free_rank)
from .sketch import (HRTT, SRTT, Gaussian, SketchOperator, Transform, apply_left, apply_right,
                     build_sketch, extend_sketch, orthonormal_transform)
from .synthetic import (FAMILIES, GAP_SPECTRUM, ExpDecay, FactorKind, PolyDecay, Steps,
                        make_test_matrix, spectrum, true_eps_rank)

__version__ = "0.1.0"
