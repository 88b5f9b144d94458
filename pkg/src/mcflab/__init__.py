"""mcflab: desk-scale numerical laboratory for mean curvature flow of triangle meshes."""

from .mesh import TriMesh, surface_integral, load_off, save_off, load_obj, load_mesh
from .curvature import CurvatureField, estimate_curvature

__all__ = [
    "TriMesh",
    "CurvatureField",
    "estimate_curvature",
    "surface_integral",
    "load_off",
    "save_off",
    "load_obj",
    "load_mesh",
    "Scenario",
    "generate",
    "StepControl",
    "FlowHistory",
    "run_flow",
    "run_rescaled",
    "intrinsic_diameter",
    "ControlParams",
    "check_control_params",
    "gaussian_area",
    "entropy",
    "huisken_phi",
    "curvature_integral",
    "topping_check",
    "regularity_scale",
    "fit_cylinder",
    "detect_necks",
    "track_strong_neck",
    "measure_tilt",
    "assemble_tubes",
    "ExperimentConfig",
    "run_experiment",
    "report",
]

__version__ = "0.1.0"

from .scenarios import Scenario, generate
from .flow import StepControl, FlowHistory, run_flow, run_rescaled
from .geodesic import intrinsic_diameter
from .control import ControlParams, check_control_params
from .functionals import (
    gaussian_area,
    entropy,
    huisken_phi,
    curvature_integral,
    topping_check,
    regularity_scale,
)
from .necks import fit_cylinder, detect_necks, track_strong_neck, measure_tilt
from .tubes import assemble_tubes
from .experiment import ExperimentConfig, run_experiment, report
