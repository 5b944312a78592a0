"""Numerical laboratory for matrix concentration tail bounds, exponential
trace inequalities, discrete-model interdependence analysis, and coupled
Gibbs-chain experiments."""

__version__ = "0.1.0"

from .hermitian import (
    ENSEMBLE_KINDS,
    EnsembleSpec,
    HermiticityError,
    HermitianMatrix,
    LoewnerCheck,
    SpectralDecomposition,
    SpectralDomainError,
    load_matrix,
    matrix_exp,
    matrix_from_obj,
    matrix_function,
    matrix_to_obj,
    negative_part,
    pos_neg_parts,
    positive_part,
    psd_order_leq,
    sample_ensemble,
    save_matrix,
    spectral_decompose,
    spectral_norm,
    trace_real,
)
from .traceineq import (
    INEQUALITY_IDS,
    FuzzSummary,
    TraceGapReport,
    check_psd_cross,
    fuzz_grid,
    fuzz_inequality,
    gap_exchangeable,
    gap_exchangeable_scaled,
    gap_holder,
    gap_pair_exp,
    gap_power,
    gap_psd_cross,
    gap_symmetric_term,
    gap_trace_quad,
)
from .bounds import (
    BoundParams,
    DifferenceBoundSet,
    LaplaceBound,
    TrMgfEstimate,
    display_clamp,
    dobrushin_constant,
    hoeffding_bound,
    hoeffding_bound_dependent,
    laplace_infimum,
    tail_bound_dependent,
    tail_bound_independent,
    trace_mgf_estimate,
    tropp_bound,
    variance_parameter,
)
from .dobrushin import (
    BMatrix,
    DiscreteModel,
    EnumerationCapError,
    InterdependenceMatrix,
    b_matrix,
    b_power_column,
    dobrushin_matrix,
    load_model,
    matrix_norms,
    model_from_obj,
    model_to_obj,
    norm_recursion_check,
    save_model,
    tv_distance,
)
from .coupling import (
    CouplingState,
    MatrixObservable,
    RademacherSumObservable,
    SteinPairSpec,
    TableObservable,
    TruncationError,
    antisymmetric_F,
    check_hamming,
    coupon_collector_survival,
    coupon_collector_weighted,
    derive_hamming_bounds,
    exchangeable_pair_joint,
    exhaustive_tail,
    gibbs_kernel,
    greedy_disagreement_mc,
    initial_state,
    make_exchangeable_pair,
    maximal_coupling,
    maximal_coupling_joint,
    mc_tail_estimate,
    step_greedy,
    step_independent,
    stein_identity_check,
    telescoping_decomposition,
    verify_property_P,
    verify_stein_pair,
    wilson_interval,
)
from .conjectures import (
    CATALOG,
    ConvexCatalogEntry,
    SearchResult,
    catalog_entry,
    check_self_bounding,
    counterexample_search,
    gap_conjecture_exp,
    gap_conjecture_f,
    scalar_gap_exp,
    scalar_gap_f,
)
