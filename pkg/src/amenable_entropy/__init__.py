"""Finite-scale dimensional entropies of symbolic systems over amenable groups."""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .covering import (BallFamily, CoverSelection, delta_disjointify, five_r_select,
                       lindenstrauss_cover, max_separated, min_spanning)
from .errors import AmenableEntropyError, DomainError, InvariantViolation, ResourceError
from .estimators import (EstimatorParams, bowen_entropy_estimate, bowen_exponent, capacity_rate,
                         dimension_correspondence, entropy_chain_check, packing_entropy_estimate,
                         packing_exponent)
from .group import (FiniteSubset, FolnerSequence, InfiniteDihedral, IntegerLattice,
                    centered_boxes, dihedral_balls, folner_family, from_function,
                    growth_diagnostic, invariance_defect, k_boundary, one_sided_boxes,
                    regular_system_check, tempered_prefix_constant)
from .measures import (Bernoulli, Markov, Mixture, PointMass, ProductMeasure, TreeMeasure,
                       XabMeasure, generic_point_diagnostic, local_entropy_trace,
                       upper_local_entropy_over, variational_gap)
from .shift import (Cylinder, CylinderTree, DensitySet, PatternConfiguration, PointSample, Predicate,
                    bowen_ball_window, build_tree, full_shift, random_tree, symbolic_distance,
                    xab_predicate)
from .worked_examples import (BlockCode, factor_inequality_check, srw_range_statistics,
                              tt_fiber_ball_check, tt_fiber_entropies, tt_walk, xab_oracle)
