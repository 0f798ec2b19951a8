"""Sparse kinetic Ising networks: simulation, L1 reconstruction and ROC evaluation."""
from .errors import EmptyAverageError, NumericalError, ParameterError, StageError
from .evaluate import BondTruth, RocCurve, classify, confusion, error_table, roc_from_path
from .glauber import SpinHistory, local_field, simulate
from .inference import (CouplingEstimate, fit_l1, fit_l1_smooth, fit_unregularized, gradient,
                        neg_log_likelihood)
from .netgen import ModelParams, generate_network
from .regpath import (FisherSet, RegPath, first_order_shift, fisher_matrix, fisher_set,
                      full_l1_path, integrate_path, j0_cut, linear_extrapolation)

__version__ = "0.1.0"
