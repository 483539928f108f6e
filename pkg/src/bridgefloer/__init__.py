"""Pseudo-spectral Bridges-Hamiltonian field theory on the torus: operators, actions,
Legendre transform, Floer flow, symbol analysis and a multi-start solution search."""

from .flow import FlowConfig, FlowTrajectory, HomotopyProfile, beta, floer_rhs, run_flow
from .hamiltonian import HamiltonianSpec, action, bridges_residual, grad_action, grad_H, hamilton_residual
from .nonlinearity import Cosine, CutoffProfile, Polynomial, Zero, make_potential
from .search import SearchConfig, SolutionRecord, dedup, find_solutions
from .spectral import PhaseField, SpectralField, TorusGrid, bridges_op, d_t, d_tbar, laplacian, slashed_del
from .symbol import invertibility_scan, symbol, symbol_det, symbol_eigs

__version__ = "0.1.0"
