"""specfisher: Fisher-information limits and Monte Carlo verification for
spectrum-parameter estimation of a hidden stationary Gaussian process."""

from .errors import CalibrationError, NumericError, SpecfisherError
from .psdmodel import (ParamVector, PsdModel, SnrContext, ou_log_grad, ou_model,
                       ou_value, snr_C)
from .fisher import (BoundsReport, InfoMatrix, asymptotics, bounds_report,
                     coherent_state_floor, homodyne_info, homodyne_limit, invert_info,
                     normalized_error_matrix, normalized_info_matrix,
                     ou_homodyne_closed, ou_quantum_closed, phase_quantum_bound,
                     quantum_bound, spc_info)
from .synth import (BandwidthWarning, PhotonRecord, TimeTrace, add_homodyne_noise,
                    bose_einstein_pmf, load_photon_record, load_trace,
                    save_photon_record, save_trace, spc_counts, synth_process)
from .estimator import (Estimate, Periodogram, moment_init, noise_floor_estimate,
                        periodogram, spc_loglik, spc_mle, whittle_loglik,
                        whittle_mle)
from .harness import (ErrorStats, McConfig, Measurement, bounds_sweep,
                      calibrate_scale, desk_scale_config, load_traces,
                      normalized_eps, run_trials)

__version__ = "0.1.0"

__all__ = [
    "SpecfisherError", "NumericError", "CalibrationError",
    "ParamVector", "PsdModel", "SnrContext", "ou_value", "ou_log_grad",
    "ou_model", "snr_C",
    "InfoMatrix", "BoundsReport", "coherent_state_floor", "quantum_bound", "phase_quantum_bound",
    "homodyne_info", "homodyne_limit", "spc_info", "ou_quantum_closed",
    "ou_homodyne_closed", "asymptotics", "invert_info",
    "normalized_error_matrix", "normalized_info_matrix", "bounds_report",
    "TimeTrace", "PhotonRecord", "BandwidthWarning", "synth_process",
    "add_homodyne_noise", "spc_counts", "bose_einstein_pmf",
    "save_trace", "load_trace", "save_photon_record", "load_photon_record",
    "Periodogram", "Estimate", "periodogram", "whittle_loglik", "whittle_mle",
    "noise_floor_estimate", "spc_loglik", "spc_mle", "moment_init",
    "McConfig", "Measurement", "ErrorStats", "run_trials", "bounds_sweep",
    "calibrate_scale", "desk_scale_config", "load_traces", "normalized_eps",
    "__version__",
]
