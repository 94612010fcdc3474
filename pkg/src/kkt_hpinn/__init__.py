"""Surrogate MLPs with hard linear equality constraints via KKT projection layers."""

from .data import (
    TASKS,
    Dataset,
    TaskDef,
    cstr_generate,
    distillation_generate,
    filter_feasible,
    fit_maxabs,
    generate,
    plant_generate,
    read_csv,
    write_csv,
)
from .errors import (
    ConfigError,
    DataError,
    ParseError,
    ScaleError,
    SchemaError,
    ShapeError,
    SingularityError,
    TrainingError,
)
from .harness import ExperimentConfig, SummaryTable, emit_learning_curves, run_experiment
from .linalg import matmul, spd_solve, transpose
from .network import AdamState, Mlp, adam_step, backward, forward, init_mlp, load_checkpoint, save_checkpoint
from .projection import (
    ConstraintSpec,
    ProjectionParams,
    apply_projection,
    build_projection,
    projection_backward,
    rescale_constraints,
    violation,
)
from .training import (
    RunReport,
    TrainConfig,
    TrainMode,
    evaluate,
    loss_kkt,
    loss_nn,
    loss_pinn,
    predict,
    split_indices,
    train,
)

__version__ = "0.1.0"
