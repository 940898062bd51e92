"""blockteach: learn block-world action concepts from demonstrations.

Pipeline: record or load demonstrations, extract qualitative features,
mine pattern consistencies, confirm them with a teacher through yes/no
questions, store the confirmed concept, and reenact it in novel scenes by
constraint-checked search.
"""

from .scene import (
    ActionSignature,
    Demonstration,
    Frame,
    MoveEpisode,
    ObjectPose,
    RoleBinding,
    generate_synthetic,
    interpolate_keyframes,
    load_demonstration,
    resolve_dynamic_binding,
    segment_move_episodes,
    write_demonstration,
)
from .features import (
    FeatureFunction,
    FeatureKind,
    QuantizationConfig,
    extract_feature_sequence,
)
from .patterns import (
    Comparator,
    EvaluationReport,
    Pattern,
    Template,
    entails,
    evaluate_pattern,
    parse_pattern,
    satisfying_set,
    serialize_pattern,
)
from .mining import (
    BiasModel,
    MinedPattern,
    MinerConfig,
    confidence_score,
    enumerate_candidates,
    mine,
    probability,
)
from .dialogue import (
    TeachingSession,
    apply_answer,
    build_queue,
    next_question,
    render_question,
)
from .concepts import (
    ConceptRecord,
    ConceptRelation,
    ConceptStore,
    relate_concepts,
)
from .reenact import (
    ConstraintSet,
    PlanNotFound,
    PlanTrace,
    SearchConfig,
    check_transition,
    generate_candidate_steps,
    plan,
    split_constraints,
    termination_satisfied,
)
from .service import SessionState, handle_message, replay_transcript

__version__ = "0.1.0"
