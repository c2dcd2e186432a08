"""Quiver representations with symmetric, supermixed and generalized structure.

Gauge equations, Kempf-Ness functionals, stability witnesses and polystable
decompositions for finite-dimensional representations.
"""

from .decomposition import (
    DUAL_PAIR_E,
    ORTH_STABLE_F,
    PLAIN_STABLE,
    SELFDUAL_PAIR_S,
    DecompositionReport,
    Destabilizer,
    EndAlgebra,
    NonSemisimpleError,
    SearchOptions,
    classify_orthogonal_decomposition,
    decompose,
    endomorphism_algebra,
    find_destabilizer,
    find_isotropic_destabilizer,
    hyperbolic_pair,
    is_isomorphic,
    is_simple,
    orth_plain_relation_check,
    orthogonal_sum,
)
from .generalized import (
    BuiltQuiver,
    GeneralizedQuiverSpec,
    MixedQuiverSetting,
    Summand,
    build_symmetric_quiver,
    check_equivariance,
    embed_representation,
    extract_representation,
    random_structured_gauge,
    sample_mixed_block,
    validate_character_grading,
    validate_mixed_setting,
)
from .moment import (
    INF,
    OnePS,
    SolveOptions,
    SolveReport,
    TraceObstruction,
    filtration_invariance,
    finite_time_weight,
    gauge_residual,
    kempf_ness,
    kempf_ness_quadrature,
    maximal_weight,
    moment_map,
    orthogonal_weight,
    solve_gauge_equation,
    weight_filtration,
)
from .quiver import (
    Arrow,
    DimensionVector,
    GaugeElement,
    Quiver,
    QuiverError,
    Representation,
    SubrepCandidate,
    ValidationReport,
    direct_sum,
    gauge_act,
    generated_subrep,
    random_representation,
    representation_dimension,
    validate_quiver,
)
from .symmetric import (
    BlockForm,
    StructureError,
    SymmetricStructure,
    is_isotropic,
    is_structured_rep,
    orthogonal_complement,
    project_structured,
    sigma_transpose,
    standard_form,
    validate_symmetric,
)

__version__ = "0.1.0"
