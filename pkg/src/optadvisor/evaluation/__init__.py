from .experiments import (
    EvalOutcome,
    ExperimentSpec,
    GroupSelector,
    Split,
    TestCase,
    make_split,
    model_predictor,
    run_experiment,
    shared_optimizations,
    protocol_spec,
)
from .metrics import (
    SignAccuracy,
    accuracy_summary,
    export_ratios_csv,
    read_ratios_csv,
    sign_accuracy,
    write_summary_json,
)
from .synthetic import (
    OPTIMIZATION_CATALOG,
    ProfileDataset,
    ProgramInfo,
    generate_synthetic_dataset,
    read_dataset,
    write_dataset,
)
