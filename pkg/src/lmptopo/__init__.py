"""Grid topology recovery and tracking from real-time electricity prices."""

from .grid import (GridTopology, GridMatrices, Line, build_matrices,
                   flows_from_injections, reduced_to_full_laplacian, ieee30)
from .market import (OfferCurve, MarketInstance, DispatchOutcome, PriceMatrix,
                     expand_blocks, clear_market, subtract_reference,
                     assemble_price_matrix)
from .prox import (HuberParams, soft_threshold, psd_logdet_prox, l1_row_prox,
                   huber_row_prox, huber_value, huber_total)
from .batch import (RecoveryParams, AdmmState, run_batch,
                    normalize_and_threshold, tune_kappas, average_degree)
from .online import (OnlineParams, OnlineState, init_online, compute_anchor,
                     step_l1, step_huber, snapshot)
from .scenario import ScenarioConfig, Scenario, build_scenario, simulate
from .experiments import (RecoveryReport, SwapEvent, TrackingResult, evaluate,
                          run_batch_experiment, run_tracking_experiment)

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
