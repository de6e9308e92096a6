"""Curvature of (alpha, beta)-Finsler metrics by truncated Taylor arithmetic."""
from .errors import *  # noqa: F401,F403
from .finsler import ABMetric, CurvatureBundle, analyze_point, extract_flag_curvature
from .gallery import NavigationData, build_thm2iic, build_thm3, cor51_build
from .jets import Jet, fd_oracle, lift, partial
from .phiode import ABParams, PhiSolution, phi_closed, solve_phi
from .riemannian import MetricField, OneFormField

__version__ = "0.1.0"
