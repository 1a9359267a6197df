"""Exact micro-scale simulation of the block coding schemes."""

from .codebooks import (
    BinningCodebook,
    IndexCodebook,
    ResolvCodebook,
    SuperpositionCodebook,
    n_bins,
    seq_power,
)
from .diagnostics import (
    CodebookAverage,
    RateWindow,
    average_m_uniformity,
    expected_divergence_over_codebooks,
    m_uniformity_diagnostic,
    rate_window,
    run_symbolwise,
    sampled_bin_diagnostics,
    spec_rate_window,
)
from .engine import CSV_COLUMNS, BlockRecord, SimReport, run_blocks
from .schemes import (
    BroadcastCodebooks,
    BroadcastSchemeSpec,
    InteractiveSchemeSpec,
    P2PCodebooks,
    P2PSchemeSpec,
    broadcast_rate_region,
    build_broadcast_scheme,
    exact_broadcast_divergence,
    exact_induced_divergence,
    exact_interactive_divergence,
    interactive_joint_law,
    interactive_reduction_gap,
    p2p_joint_law,
    reduce_interactive_to_p2p,
    sample_codebooks,
    sample_interactive_codebooks,
)
