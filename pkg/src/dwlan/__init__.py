"""Dense-WLAN user/AP association workbench.

Utility-weighted bipartite association (with an incremental dynamic
variant), four baseline schemes, and a slot-level CSMA/CA Monte Carlo
simulator for comparing them.
"""

from .association import (
    AssociationSet,
    associate,
    bpf,
    build_weights,
    gaa,
    gda_admit,
    gda_weight_change,
    greedy,
    smartassoc,
    ssf,
)
from .mac import UNSERVABLE, FairnessParams, MacParams
from .matching import Matching, WeightMatrix, add_vertex, pad_and_replicate, solve, update_weights
from .phy import Beamformer, ChannelMatrix, PhyParams, channel_rate, compute_sinr, zf_beamformer
from .scenario import Scenario, ScenarioTemplate
from .simcore import (
    MobilityParams,
    MonteCarloResult,
    RunMetrics,
    per_user_cdf,
    run_dynamic,
    run_monte_carlo,
    run_realization,
)
from .topology import Intensities, NetworkGeometry, RadioParams, candidate_aps, generate_ppp, in_csr, rss_dbm

__version__ = "0.1.0"

__all__ = [
    "AssociationSet",
    "Beamformer",
    "ChannelMatrix",
    "FairnessParams",
    "Intensities",
    "MacParams",
    "Matching",
    "MobilityParams",
    "MonteCarloResult",
    "NetworkGeometry",
    "PhyParams",
    "RadioParams",
    "RunMetrics",
    "Scenario",
    "ScenarioTemplate",
    "UNSERVABLE",
    "WeightMatrix",
    "add_vertex",
    "associate",
    "bpf",
    "build_weights",
    "candidate_aps",
    "channel_rate",
    "compute_sinr",
    "gaa",
    "gda_admit",
    "gda_weight_change",
    "generate_ppp",
    "greedy",
    "in_csr",
    "pad_and_replicate",
    "per_user_cdf",
    "run_dynamic",
    "run_monte_carlo",
    "run_realization",
    "rss_dbm",
    "smartassoc",
    "solve",
    "ssf",
    "update_weights",
    "zf_beamformer",
]
