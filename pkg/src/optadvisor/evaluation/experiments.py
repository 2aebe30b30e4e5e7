"""Train/test protocols over a profiled version lattice and their outcomes."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import SplitError
from ..learners import DEFAULT_K, Dataset, train_model
from ..optdb import TrainingInstance, pairs_from_records
from ..profile_ingest import FeatureSchema, FeatureVector, SampleRecord, build_schema, normalize
from ..recommender import SPEEDUP_FLOOR
from .synthetic import ProfileDataset

Group = tuple[str, str, int]
# trains on one optimization's training set, returns a batch predictor over feature rows
PredictorFactory = Callable[[Dataset, str], Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class GroupSelector:
    program: str
    inputs: tuple[str, ...]
    runs: tuple[int, ...]

    def __call__(self, group: Group) -> bool:
        program, input_id, run_id = group
        return program == self.program and input_id in self.inputs and run_id in self.runs


@dataclass(frozen=True)
class ExperimentSpec:
    id: int
    training: GroupSelector
    testing: GroupSelector
    testing_includes_training: bool
    same_input: bool

    def __post_init__(self):
        if not self.testing_includes_training:
            overlap = (self.training.program == self.testing.program
                       and set(self.training.inputs) & set(self.testing.inputs)
                       and set(self.training.runs) & set(self.testing.runs))
            if overlap:
                raise SplitError(f"experiment {self.id}: training and testing selectors overlap")


def protocol_spec(exp_id: int, ds: ProfileDataset, train_input: str | None = None,
                primary: str = "BH", secondary: str = "NB") -> ExperimentSpec:
    """The six train/test protocols, mapped onto ``ds``.

    1: one run of one input -> all runs of it (test includes train)
    2: one run -> the other two runs;  3: two runs -> the remaining run
    4: all runs of one input -> run 0 of every other input
    5/6: all runs of one input of one program -> run 0 of every input of the other
    """
    if exp_id not in range(1, 7):
        raise SplitError(f"experiment id must be 1..6, got {exp_id}")
    if primary not in ds.programs:
        primary = sorted(ds.programs)[0]
    train_prog = primary
    test_prog = primary
    if exp_id in (5, 6):
        if secondary not in ds.programs or secondary == primary:
            raise SplitError(f"experiment {exp_id} needs programs {primary!r} and {secondary!r}")
        if exp_id == 6:
            train_prog, test_prog = secondary, primary
        else:
            test_prog = secondary
    train_inputs = ds.programs[train_prog].input_ids
    if train_input is None or exp_id == 6 and train_input not in train_inputs:
        train_input = train_inputs[len(train_inputs) // 2]
    if train_input not in train_inputs:
        raise SplitError(f"unknown training input {train_input!r} for {train_prog}")
    runs = tuple(sorted({r.run_id for r in ds.records}))

    def sel(program, inputs, run_ids):
        return GroupSelector(program, tuple(inputs), tuple(run_ids))

    one = (train_input,)
    if exp_id == 1:
        return ExperimentSpec(1, sel(train_prog, one, runs[:1]), sel(test_prog, one, runs), True, True)
    if exp_id == 2:
        return ExperimentSpec(2, sel(train_prog, one, runs[:1]), sel(test_prog, one, runs[1:]), False, True)
    if exp_id == 3:
        return ExperimentSpec(3, sel(train_prog, one, runs[:-1]), sel(test_prog, one, runs[-1:]), False, True)
    others = [i for i in ds.programs[test_prog].input_ids if i != train_input]
    return ExperimentSpec(exp_id, sel(train_prog, one, runs), sel(test_prog, others, runs[:1]), False, False)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    features: FeatureVector
    actual: float
    key: tuple[str, str, int, int, str]


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: tuple[TestCase, ...]
    n_train_vectors: int
    n_test_vectors: int


@dataclass(frozen=True)
class EvalOutcome:
    experiment: int
    learner: str
    optimization: str
    program: str
    input_id: str
    input_rank: int
    run_id: int
    version_mask: int
    actual: float
    expected: float

    @property
    def ratio(self) -> float:
        return self.actual / self.expected

    def sort_key(self):
        return (self.experiment, self.learner, self.optimization, self.program,
                self.input_rank, self.run_id, self.version_mask)


def _select(ds: ProfileDataset, selector: GroupSelector) -> list[SampleRecord]:
    records = [r for r in ds.records if r.kernel == ds.kernel and selector(r.group)]
    if not records:
        raise SplitError(f"selector {selector} matches no records")
    return records


def _check_lattice(records: Sequence[SampleRecord], n_opts: int):
    by_group: dict[Group, set[int]] = {}
    for r in records:
        by_group.setdefault(r.group, set()).add(r.version_mask)
    for group, masks in sorted(by_group.items()):
        if len(masks) != 1 << n_opts:
            raise SplitError(f"incomplete version lattice for {group}: {len(masks)} of {1 << n_opts} versions")


def dataset_schema(ds: ProfileDataset) -> FeatureSchema:
    return build_schema([r for r in ds.records if r.kernel == ds.kernel])


def make_split(ds: ProfileDataset, spec: ExperimentSpec, optimization_id: str,
               schema: FeatureSchema | None = None) -> Split:
    schema = schema or dataset_schema(ds)
    train_prog, test_prog = spec.training.program, spec.testing.program
    for prog in (train_prog, test_prog):
        if optimization_id not in ds.programs[prog].optimizations:
            raise SplitError(f"optimization {optimization_id!r} is not studied for {prog}")
    train_recs = _select(ds, spec.training)
    test_recs = _select(ds, spec.testing)
    _check_lattice(train_recs, len(ds.programs[train_prog].optimizations))
    _check_lattice(test_recs, len(ds.programs[test_prog].optimizations))
    if not spec.testing_includes_training:
        shared = {r.group for r in train_recs} & {r.group for r in test_recs}
        if shared:
            raise SplitError(f"experiment {spec.id}: groups in both train and test: {sorted(shared)}")

    def order(p):
        b = p.before
        return (b.program, ds.input_rank(b.program, b.input_id), b.run_id, b.version_mask)

    train_pairs = sorted(pairs_from_records(train_recs, ds.programs[train_prog].bit(optimization_id)), key=order)
    test_pairs = sorted(pairs_from_records(test_recs, ds.programs[test_prog].bit(optimization_id)), key=order)
    train = Dataset(schema, tuple(TrainingInstance(normalize(p.before, schema), p.speedup, p.before.key)
                                  for p in train_pairs))
    test = tuple(TestCase(normalize(p.before, schema), p.speedup, p.before.key) for p in test_pairs)
    return Split(train, test, len(train_recs), len(test_recs))


def shared_optimizations(ds: ProfileDataset, spec: ExperimentSpec) -> list[str]:
    a = ds.programs[spec.training.program].optimizations
    b = set(ds.programs[spec.testing.program].optimizations)
    return sorted(o for o in a if o in b)


def model_predictor(learner_kind: str, k: int = DEFAULT_K) -> PredictorFactory:
    def factory(train: Dataset, opt_id: str):
        return train_model(train, learner_kind, opt_id, k).predict_array
    return factory


def run_experiment(ds: ProfileDataset, spec: ExperimentSpec, learner_kind: str = "ibk", k: int = DEFAULT_K,
                   predictor_factory: PredictorFactory | None = None,
                   optimizations: Sequence[str] | None = None) -> list[EvalOutcome]:
    """Train per optimization on the split, predict every test case, record (AC, EX)."""
    factory = predictor_factory or model_predictor(learner_kind, k)
    schema = dataset_schema(ds)
    outcomes = []
    for opt in optimizations or shared_optimizations(ds, spec):
        split = make_split(ds, spec, opt, schema)
        predict = factory(split.train, opt)
        X = np.array([c.features.values for c in split.test], dtype=float).reshape(len(split.test), len(schema))
        preds = np.asarray(predict(X), dtype=float)
        for case, ex in zip(split.test, preds.tolist()):
            program, input_id, run_id, mask, _ = case.key
            outcomes.append(EvalOutcome(
                experiment=spec.id, learner=learner_kind, optimization=opt, program=program,
                input_id=input_id, input_rank=ds.input_rank(program, input_id), run_id=run_id,
                version_mask=mask, actual=case.actual, expected=max(ex, SPEEDUP_FLOOR),
            ))
    outcomes.sort(key=EvalOutcome.sort_key)
    return outcomes
