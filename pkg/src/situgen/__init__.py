"""situgen: situated 3D scene QA and next-step-navigation data engine."""

from .errors import (
    EvaluationError,
    GenerationError,
    ParseError,
    PlanningError,
    RefinementError,
    SamplingError,
    SceneValidationError,
    SitugenError,
)
from .evaluation import (
    EvalReport,
    JudgeScore,
    build_judge_prompt,
    correctness,
    exact_match,
    msnn_accuracy,
    parse_judge_output,
    pearson,
    refined_exact_match,
)
from .graph import (
    AgentEdge,
    Edge,
    RelationConfig,
    SituatedGraph,
    build_situated_graph,
    clock_direction,
    compute_agent_edges,
    compute_static_relations,
    situate_proximity,
    subgraph,
)
from .nav import MSNNRecord, gen_msnn_record, next_action, plan_path, sample_goal
from .pipeline import RunConfig, run_pipeline, stats, verify_file
from .qa import (
    QAPair,
    WildVocab,
    augment_negative_existence,
    build_attribute_prompt,
    build_qa_prompt,
    generate_batch,
    generate_templated,
    parse_llm_output,
)
from .refine import (
    RefinementReport,
    ReviewVerdict,
    apply_verdicts,
    balance_existence,
    drop_negative_responses,
    refine_batch,
    verify_counting,
    verify_existence,
)
from .scene import (
    AttributeRecord,
    FloorRegion,
    ObjectInstance,
    OccupancyGrid,
    Scene,
    load_scene,
    normalize_to_situation,
    rasterize_floor,
    save_scene,
)
from .situations import (
    HoiBank,
    InterleavedText,
    Situation,
    render_action_description,
    render_location_description,
    sample_interact_large,
    sample_interact_small,
    sample_sitting,
    sample_standing,
)

__version__ = "0.1.0"
