"""Rate regions and queue simulation for two-receiver broadcast erasure channels."""

from duocast.channel import (
    Belief,
    ChannelModel,
    ErasureStats,
    FeedbackWindow,
    OUTCOMES,
    belief_update,
    cond_erasure_hidden,
    cond_erasure_visible,
    forgetting_check,
    ge_hidden,
    ge_visible,
    load_channel,
    memoryless,
    sample_step,
    stationary_distribution,
    window_distribution,
)
from duocast.harness import (
    Scenario,
    SimTrace,
    SplitAllocation,
    StabilityVerdict,
    per_state_split,
    prediction_gap,
    run,
    stability_verdict,
    sweep,
    sweep_to_csv,
    throughput_check,
)
from duocast.kernel import SimCounts, jit_enabled, run_counts
from duocast.lp import LinearProgram, LpSolution, feasible, solve
from duocast.policies import (
    PolicyDecision,
    action_weights,
    maxweight_decide,
    per_state_memoryless_decide,
    probabilistic_decide,
)
from duocast.queuenet import (
    Packet,
    QueueNetwork,
    apply_slot,
    audit_decodability,
    flow_divergence,
)
from duocast.regions import (
    ActionDistribution,
    CutValues,
    RatePoint,
    RateRegion,
    RegionWitness,
    cut_values,
    diagonal_rate,
    flow_optimum,
    flow_solve,
    hausdorff_distance,
    hidden_window_stats,
    link_capacities,
    redundancy_transform,
    region_hidden_L,
    region_membership,
    region_memoryless_fb,
    region_memoryless_nofb,
    region_minkowski,
    region_reactive,
    region_to_csv,
    region_to_json,
    region_uncoded,
    region_visible,
    synthesize_policy,
    witness_to_distribution,
)

__all__ = [
    "ActionDistribution",
    "Belief",
    "ChannelModel",
    "CutValues",
    "ErasureStats",
    "FeedbackWindow",
    "LinearProgram",
    "LpSolution",
    "OUTCOMES",
    "Packet",
    "PolicyDecision",
    "QueueNetwork",
    "RatePoint",
    "RateRegion",
    "RegionWitness",
    "Scenario",
    "SimCounts",
    "SimTrace",
    "SplitAllocation",
    "StabilityVerdict",
    "action_weights",
    "apply_slot",
    "audit_decodability",
    "belief_update",
    "cond_erasure_hidden",
    "cond_erasure_visible",
    "cut_values",
    "diagonal_rate",
    "feasible",
    "flow_divergence",
    "flow_optimum",
    "flow_solve",
    "forgetting_check",
    "ge_hidden",
    "ge_visible",
    "hausdorff_distance",
    "hidden_window_stats",
    "jit_enabled",
    "link_capacities",
    "load_channel",
    "maxweight_decide",
    "memoryless",
    "per_state_memoryless_decide",
    "per_state_split",
    "prediction_gap",
    "probabilistic_decide",
    "redundancy_transform",
    "region_hidden_L",
    "region_membership",
    "region_memoryless_fb",
    "region_memoryless_nofb",
    "region_minkowski",
    "region_reactive",
    "region_to_csv",
    "region_to_json",
    "region_uncoded",
    "region_visible",
    "run",
    "run_counts",
    "sample_step",
    "solve",
    "stability_verdict",
    "stationary_distribution",
    "sweep",
    "sweep_to_csv",
    "synthesize_policy",
    "throughput_check",
    "window_distribution",
    "witness_to_distribution",
]
