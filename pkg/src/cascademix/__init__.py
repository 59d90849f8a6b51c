"""Mixtures of Independent Cascade models for true/fake diffusion analysis."""

__version__ = "0.1.0"

from .cascades import Cascade, CascadeSet, Window, derive_candidate_edges, index_cascades, parse_cascades
from .diffusion import estimate_influence, generate_synthetic_benchmark, sample_mixture_cascades, simulate_ic
from .errors import DomainError, ParseError
from .graph import DirectedGraph, NodeIds, load_edge_list
from .inference import EMConfig, fit, fit_hic, heldout_nll
from .params import ComponentParams, MixtureParams, load_model, save_model

__all__ = [
    "Cascade", "CascadeSet", "Window", "derive_candidate_edges", "index_cascades", "parse_cascades",
    "estimate_influence", "generate_synthetic_benchmark", "sample_mixture_cascades", "simulate_ic",
    "DomainError", "ParseError", "DirectedGraph", "NodeIds", "load_edge_list",
    "EMConfig", "fit", "fit_hic", "heldout_nll",
    "ComponentParams", "MixtureParams", "load_model", "save_model",
]
