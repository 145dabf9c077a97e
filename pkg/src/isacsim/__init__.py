"""Mono-static OFDM radar / ISAC simulator and analysis toolkit.

Subpackages follow the processing chain: ``linkbudget`` (analytic
model), ``scene`` (frame synthesis), ``dsp`` (channel estimation, clutter
removal, periodogram), ``detect`` (CA-CFAR and replica suppression),
``track`` (association and validation) and ``harness`` (scenario replay
and metrics).
"""

from .linkbudget import (LinkBudgetParams, InterferencePsd, RangeWindowModel,
                         MaxRangeResult, default_params, interference_psd,
                         snr_at_unit_range, r_star, range_window, max_range,
                         expected_sinr_at_range, sinr_curves)
from .scene import (Beam, Target, ClutterObject, Scenario, RadioFrame,
                    TruthRecord, beam_gain, combined_coupling_loss,
                    default_dl_mask, mask_gap_period_symbols, synthesize_frame,
                    make_experiment1_scenario, make_experiment2_scenario)
from .dsp import (ChannelEstimate, ClutterMap, Periodogram,
                  StaleClutterMapWarning, estimate_channel, eca_c_remove,
                  crap_acquire, crap_remove, periodogram, exclusion_mask,
                  estimate_noise_floor)
from .detect import (CfarConfig, Detection, cfar_threshold_map, cfar_detect,
                     suppress_tdd_replicas, annotate_sinr)
from .track import Track, Tracker, range_rate_consistency
from .harness import (ChainConfig, RunMetrics, replay, replica_velocity_step,
                      model_report, render_model_report)

__version__ = "0.1.0"
