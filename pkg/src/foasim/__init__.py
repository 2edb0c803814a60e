"""Formation-of-arrays satellite antenna and multi-beam network simulator."""
from .config import ScenarioConfig, load_config
from .coverage import BeamPlan, build_beam_lattice, coverage_angle, coverage_cone
from .geometry import (ArrayGeometry, FoAGeometry, build_foa_explicit, build_foa_grid, build_foa_quincunx,
                       build_square_array, build_winglet_array, wavelength)
from .linkbudget import ScenarioResult, run_throughput_procedure
from .pattern import beam_radius, pattern, pattern_closed_form, pattern_direct

__version__ = "0.1.0"
