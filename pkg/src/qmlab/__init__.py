"""qmlab: topological measures on grids and what they can do.

Construct topological measures from solid-set functions, quasi-integrate
grid functions against them, push them through image transformations and
Markov operators, compute Kantorovich-Rubinstein distances, approximate
invariant measures of contraction systems, and compute sample-median
distributions.
"""

from .grid import (COMPACT, OPEN, GridFunction, GridSpace, Region, complement,
                   components, disk_mask, disk_region, full_region,
                   is_precompact, is_solid, solid_hull)
from .integrals import (LevelProfile, find_nonlinearity_witness, level_profile,
                        quasi_integral, superlevel)
from .kr import (DiscreteMeasure, KRLowerBound, LipFunction, W1Result,
                 d_kr_topo_lower, lip_project, point_cloud, w1_discrete,
                 w1_value)
from .markov import (AffineMap, TransformSystem, apply, apply_discrete,
                     bin_weights, chaos_game, contraction_check, fixed_point,
                     make_system, make_system_from_generator, render_density)
from .measures import (DEFICIENT, MEASURE, TOPOLOGICAL, CheckReport,
                       SolidSetFunction, TopoMeasure, check_measure_criteria,
                       check_ssf_axioms, check_superadditivity,
                       check_tm1_sampled, extend, make_aarnes_circle,
                       make_diffuse_dtm, make_point_config, make_point_mass,
                       make_weighted_two_point)
from .median import (Family1D, Family2D, GridFamily, Interval1D, SolidVariable,
                     equivariance_check, gdsm_eval_1d, gdsm_even, gdsm_grid,
                     gdsm_measure_1d, gdsm_region, gdsm_region_1d,
                     isometry_variable, median_values, monotone_1d_variable,
                     order_statistic, sample_median_q)
from .transforms import (ImageTransform, adjoint_eval, adjoint_measure,
                         check_it_axioms, compose, constant_from_simple,
                         extend_solid_q, from_proper_map, identity_transform,
                         theta, theta_eval, two_point_hull)

__version__ = "0.1.0"
