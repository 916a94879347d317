"""Simulated measurements on the driven spin-1 system."""
from .engine import AcField, propagate_state, propagate_state_stack, readout, schedule_propagator, \
    shot_noise, zero_population
from .io import write_csv, write_sidecar
from .parallel import parallel_map, point_rngs, resolve_threads
from .protocols import (D_RAMSEY_KINDS, RobustnessGrid, d_ramsey, damped_cosine_fit, dd_ac_scan,
                        dip_position, expected_ramsey_lines, hyperfine_from_lines, rabi, ramsey,
                        robustness_map, robustness_metric,
                        robustness_trace, strain_robustness)
from .sensitivity import (DD_DEFAULTS, RAMSEY_DEFAULTS, SensitivityParams, coherence_scaling,
                          dd_sensitivity, eta_at, ramsey_sensitivity)
