"""Full-duplex multicell massive-MIMO rate simulator.

Monte Carlo and closed-form ergodic sum rates for MF/ZF transceivers under
MMSE channel estimation with pilot contamination, self-interference,
hardware impairments and fronthaul quantization.
"""

from .config import Geometry, SystemConfig, load_config, place_users, pathloss_gain
from .channel import LargeScaleProfile, build_profile, sample_channels
from .estimation import estimate_variances, make_pilots, nmse, run_pilot_phase
from .transceivers import build_detector, build_precoder, quantization_noise_power
from .rates import (RateReport, SinrBreakdown, analytic_rate, asymptotic_rate,
                    instantaneous_sinr, monte_carlo_rate, monte_carlo_rates, setup)
from .duplex import (LemmaBounds, OverheadModel, RegionVerdict, coherence_threshold,
                     half_duplex_rate, lemma_bounds, reliable_region_check)
from .sweep import SweepSpec, recipe, run_sweep

__all__ = [
    "Geometry", "SystemConfig", "load_config", "place_users", "pathloss_gain",
    "LargeScaleProfile", "build_profile", "sample_channels",
    "estimate_variances", "make_pilots", "nmse", "run_pilot_phase",
    "build_detector", "build_precoder", "quantization_noise_power",
    "RateReport", "SinrBreakdown", "analytic_rate", "asymptotic_rate",
    "instantaneous_sinr", "monte_carlo_rate", "monte_carlo_rates", "setup",
    "LemmaBounds", "OverheadModel", "RegionVerdict", "coherence_threshold",
    "half_duplex_rate", "lemma_bounds", "reliable_region_check",
    "SweepSpec", "recipe", "run_sweep",
]
