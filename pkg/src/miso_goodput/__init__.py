"""Outage and goodput analysis for multiuser MISO downlink beamforming under
Gaussian channel-estimation error."""
from .beamform import BeamformDesign, maxmin_design, maxmin_gamma, zf_directions
from .channel import Scenario, ScenarioConfig, generate
from .goodput import GoodputPoint, choose_a, evaluate_design_goodput, goodput, mc_goodput, sweep_rate
from .indefinite import ComplexQuadraticProblem, outage_probability
from .quadform import LaguerrePdf, RealQuadraticForm, fit_form, fit_laguerre

__version__ = "0.1.0"

__all__ = [
    "BeamformDesign",
    "ComplexQuadraticProblem",
    "GoodputPoint",
    "LaguerrePdf",
    "RealQuadraticForm",
    "Scenario",
    "ScenarioConfig",
    "choose_a",
    "evaluate_design_goodput",
    "fit_form",
    "fit_laguerre",
    "generate",
    "goodput",
    "maxmin_design",
    "maxmin_gamma",
    "mc_goodput",
    "outage_probability",
    "sweep_rate",
    "zf_directions",
]
