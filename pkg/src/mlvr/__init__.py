"""Multilevel variance-reduced training for regularized logistic regression."""

from .baselines import BaselineConfig, run_baseline, run_gd, run_newton_cg, run_sarah, run_sgd, run_ssn, run_svrg
from .data import SampleHierarchy, SparseDataset, build_hierarchy, doubling_sizes, load_libsvm, parse_libsvm, write_libsvm
from .errors import (
    CgBreakdown,
    ConfigError,
    ConsistencyError,
    DimensionError,
    DivergenceError,
    LineSearchError,
    NotDescentError,
    ParseError,
)
from .multilevel import LevelConfig, MlvrState, level_optimizer, ssn_config, svrg_config, train_mlvr, v_cycle
from .objective import CoupledObjective, EvalCounter, LogisticObjective, make_coupled
from .solvers import CgConfig, LineSearchConfig, backtracking_line_search, cg_solve
from .trace import Trace, read_csv, write_csv

__version__ = "0.1.0"
