"""N-to-N question-answer pair extraction from two-party dialogue.

A question or answer may span several, possibly non-contiguous utterances;
extraction assigns each utterance to at most one pair. The package covers the
whole workflow: prompt serialization and label decoding for pluggable
taggers, end-to-end and two-stage extraction, utterance- and session-level
evaluation, dialogue-structure profiling, and the review store that turns
accepted pairs into FAQ entries.
"""

from .codec import (
    LabelToken,
    LengthMismatchError,
    OverlappingUnionsError,
    PromptFormat,
    SerializedPrompt,
    labels_to_pairs,
    normalize_labels,
    pairs_to_labels,
    parse_generated_output,
    parse_slot_labels,
    serialize_cls_prompt,
    serialize_mask_prompt,
    serialize_sentinel_prompt,
)
from .core import (
    DEFAULT_ROLES,
    EmptyQuestionUnionError,
    EmptyUtteranceError,
    ExtractionResult,
    IndexOutOfRangeError,
    LabelKind,
    LabelSequence,
    NonContiguousIndicesError,
    PairCategory,
    QaeError,
    QALabel,
    QAPair,
    RoleStrings,
    Session,
    SpeakerRole,
    Utterance,
    Warning,
    WarningKind,
    categorize_pair,
    check_role_consistency,
    validate_session,
)
from .metrics import (
    CorpusStats,
    GroupRecall,
    RecallGrouping,
    SessionIdMismatchError,
    SessionScores,
    UtteranceScores,
    corpus_stats,
    grouped_recall,
    session_metrics,
    utterance_metrics,
)
from .pipeline import (
    ExtractionMode,
    HeuristicConfig,
    ModeUnsupportedError,
    Tagger,
    TaggerFailure,
    TaggerOutput,
    binary_stage1,
    extract_end_to_end,
    extract_two_stage,
    extract_with_heuristic,
    heuristic_tag,
)
from .structure import (
    BetweenRelation,
    EmptyUnionError,
    IdenticalSpansError,
    InPairShape,
    PairRelation,
    StructureProfile,
    classify_in_pair_shape,
    questioner_of,
    relate_adjacent_pairs,
    session_structure_profile,
)

__version__ = "0.1.0"
