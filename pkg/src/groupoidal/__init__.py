"""Finite groupoids, Fell bundles, and Morita-equivalence certificates."""

__version__ = "0.1.0"

from .report import (
    CheckResult,
    InternalConsistencyError,
    InvalidStructureError,
    NonFreeActionError,
    ValidationReport,
)
from .groupoids import (
    FiniteGroup,
    FiniteGroupoid,
    GroupAction,
    GroupoidEquivalence,
    GroupoidHom,
    PrincipalDecomposition,
    QuotientMap,
    SpaceAction,
    action_from_unit_map,
    actions_commute,
    check_action,
    check_covariant,
    check_homomorphism,
    check_space_action,
    group_set_action,
    is_free,
    left_bracket,
    left_translation_action,
    make_group,
    make_pair_groupoid,
    make_unit_groupoid,
    orbit_space_action,
    principal_decomposition,
    quotient_groupoid,
    right_bracket,
    semidirect_left,
    semidirect_right,
    semidirect_right_space_action,
    semidirect_space_action,
    symmetric_groupoid_equivalence,
    transformation_groupoid,
    trivial_action,
    validate_groupoid,
    verify_groupoid_equivalence,
)
from .bundles import (
    BundleAction,
    BundleElement,
    BundleEquivalence,
    BundleIso,
    BundleModuleAction,
    BundleQuotientMap,
    FellBundle,
    PrincipalFellDecomposition,
    check_bundle_action,
    check_module_action,
    exchange_residual,
    identity_fiber_maps,
    is_free_bundle_action,
    make_trivial_cbundle,
    multiply_elements,
    one_sided_equivalence,
    one_sided_transformation_equivalence,
    orbit_bundle_action,
    principal_fell_decomposition,
    pullback_bundle,
    quotient_fell_bundle,
    semidirect_fell_bundle,
    semidirect_orbit_bundle_action,
    semidirect_right_fell_bundle,
    star_element,
    symmetric_action_equivalence,
    transformation_fell_bundle,
    trivial_bundle_action,
    trivial_line_bundle,
    validate_fell_bundle,
    verify_bundle_equivalence,
    verify_bundle_iso,
)
from .algebras import (
    AlgebraAction,
    AlgebraIso,
    Representation,
    StarAlgebra,
    StarStructureReport,
    check_algebra_action,
    check_star_algebra,
    crossed_product,
    fiber_algebra,
    induced_algebra,
    regular_representation,
    section_action,
    section_algebra,
    star_structure_report,
    subalgebra,
    verify_algebra_iso,
)
from .morita import (
    LinkingSystem,
    MoritaCertificate,
    coaction_demo,
    cstar_bundle_morita,
    linking_system,
    one_sided_morita,
    one_sided_transformation_morita,
    raeburn,
    symmetric_morita,
    verify_morita,
)
from .modelio import ModelError, ModelFile, parse_model, serialize_model
from .runtime import RuntimeModel
