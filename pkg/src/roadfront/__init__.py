"""Spreading speeds and simulations for field-road models with nonlocal line diffusion."""

from .dispersion import (
    DecayResult,
    DispersionResult,
    ModelParams,
    TransportSpeeds,
    D_threshold,
    c_benchmark,
    c_field,
    c_star,
    decay_rates,
    kappa_star,
    omega_sirt_limit,
    omega_sirt_reduced,
    transport_speeds,
    w_star_reduced,
)
from .fronts import FrontTrace, estimate_decay, estimate_speed, front_position
from .kernel import Kernel, apply_J
from .nonlinearity import KppLogistic, SirCumulative, make_nonlinearity
from .simulator import BumpSpec, GridSpec, SimState, init_invasion, init_sirt, run, steady_state, step

__all__ = [
    "BumpSpec", "D_threshold", "DecayResult", "DispersionResult", "FrontTrace", "GridSpec",
    "Kernel", "KppLogistic", "ModelParams", "SimState", "SirCumulative", "TransportSpeeds",
    "apply_J", "c_benchmark", "c_field", "c_star", "decay_rates", "estimate_decay",
    "estimate_speed", "front_position", "init_invasion", "init_sirt", "kappa_star",
    "make_nonlinearity", "omega_sirt_limit", "omega_sirt_reduced", "run", "steady_state", "step",
    "transport_speeds", "w_star_reduced",
]
