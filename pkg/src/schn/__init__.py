"""Conditioned 2D Ising boxes: exact oracles, seeded Monte Carlo,
dual-lattice contour geometry, truncated contour ensembles, and the
effective-walk ballot machinery, plus a config-driven experiment runner."""

from ._kernels import HAVE_NUMBA, USE_NUMBA
from .lattice import (FrozenSpec, Lattice, LatticeError, ModelParams, Segment,
                      SpinConfiguration, build_lattice, flip_delta,
                      hamiltonian, strip_lattice)
from .exact import (ExactResult, brute_probability, fkg_audit,
                    transfer_probability)
from .mc import (ChainState, EstimateWithError, Magnetization, Schedule,
                 SitePlus, heatbath_sweep, metropolis_sweep, read_raster,
                 run_chain)
from .contours import (Contour, CutPoints, cut_points, exterior_contour_of,
                       extract_contours, interior_contains)
from .ensemble import (SemistripPathEnsemble, WeightModel, endpoint_ratio,
                       enumerate_Z, sample_directed_path, vertical_ratio)
from .walk import (BallotResult, StepDistribution, ballot_dp, ballot_mc,
                   build_steps_from_animals, endpoint_ratio_walk, h_minus,
                   h_plus, parametric_steps, scaling_suite, simple_steps)
from .experiments import run_experiment

__version__ = "0.1.0"
