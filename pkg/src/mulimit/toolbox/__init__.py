"""Layered construction: seeds, counters, segments and the writing head."""

from .construction import (
    ConstructionRule,
    build_construction,
    centralization_layer,
    cleaning_layer,
    computation_layer,
    default_sequence,
    prepare_sequences,
    random_neighbourhoods,
    rule_from_params,
    run_construction,
    seed_image_audit,
    stage_budgets,
)
from .kinetics import AREAS, SEGMENTS, Collider, KineticError, KineticRule, RowKinetics, seed_particles
from .params import ConstructionParams, Diagnostics, merge_time, require_valid, stage_of, validate_params
from .segments import (
    SegmentConfig,
    SegmentEngine,
    SegmentInfo,
    SegmentReport,
    Snapshot,
    reliable_mask,
    sample_row,
    segment_codec,
    segment_report,
    unreliable_probability,
)
from .states import LayeredCodec, LayeredState
from .colouring import AreasConfig, AreasRun, areas_codec, areas_rule, run_areas, square_is_identity
