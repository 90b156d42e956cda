"""Numerical convex conjugation, log-concave measures and modified log-Sobolev checks."""
from .potential import Potential, analyze_regularity, from_spec, gaussian, power, quartic, sextic
from .conjugate import conjugate_at, grad_inverse, llt_1d, mlsi_bracket, sup_convolution
from .measure import build_measure, entropy, integrate, variance
from .report import VerificationReport
from .suite import ExperimentConfig, emit_report, run_suite

__version__ = "0.1.0"
