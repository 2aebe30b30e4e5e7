"""Command-line entry point: ``optadvisor <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error. Domain errors print one
``optadvisor: error[E_CODE]: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import optdb
from .errors import AdvisorError
from .evaluation import (
    accuracy_summary,
    export_ratios_csv,
    generate_synthetic_dataset,
    read_dataset,
    run_experiment,
    sign_accuracy,
    protocol_spec,
    write_dataset,
    write_summary_json,
)
from .evaluation.synthetic import dataset_to_entries
from .learners import DEFAULT_K, LEARNER_KINDS, deserialize_bundle, serialize_bundle
from .profile_ingest import parse_canonical_csv, select_kernel
from .recommender import DEFAULT_MAX_COUNT, DEFAULT_THRESHOLD, ReportConfig, predict_all, rank_and_filter, render_report

log = logging.getLogger("optadvisor")


class AmbiguousProfileError(AdvisorError):
    code = "E_AMBIGUOUS_PROFILE"


class UntrainableError(AdvisorError):
    code = "E_UNTRAINABLE"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {text}")
    return value


def cmd_db(args) -> int:
    if args.db_command == "list":
        for info in optdb.list_entries(args.db):
            print(f"{info.id}\t{info.name}\t{info.n_samples}")
    elif args.db_command == "add":
        entry = optdb.add_entry(args.db, args.source)
        print(f"added {entry.id} ({len(entry.samples)} samples)")
    elif args.db_command == "remove":
        optdb.remove_entry(args.db, args.id)
        print(f"removed {args.id}")
    elif args.db_command == "import":
        ds = read_dataset(args.dataset)
        for entry in dataset_to_entries(ds, args.program, args.input, args.run):
            optdb.add_entry(args.db, entry)
            print(f"added {entry.id} ({len(entry.samples)} samples)")
    return 0


def cmd_train(args) -> int:
    from .recommender import train_all

    db = optdb.load_db(args.db)
    if not any(e.trainable for e in db):
        raise UntrainableError(f"database {args.db} has no entry with before/after samples")
    bundle = train_all(db, learner_kind=args.learner, k=args.k)
    for opt_id in sorted(bundle.models):
        print(f"trained {opt_id}: {len(db[opt_id].samples)} instances ({args.learner})")
    for opt_id in bundle.skipped:
        print(f"skipped {opt_id}: no samples")
    Path(args.out).write_bytes(serialize_bundle(bundle))
    return 0


def cmd_recommend(args) -> int:
    bundle = deserialize_bundle(Path(args.model).read_bytes())
    records = select_kernel(parse_canonical_csv(Path(args.profile).read_text(encoding="utf-8")), args.kernel)
    if len(records) != 1:
        hint = "" if args.kernel else "; pass --kernel to pick one"
        raise AmbiguousProfileError(f"profile must hold exactly one record, found {len(records)}{hint}")
    config = ReportConfig(threshold=args.threshold, max_count=args.top,
                          include_explanations=args.explain, include_examples=args.examples)
    preds = predict_all(bundle.models, records[0])
    recs = rank_and_filter(preds, config, bundle.entries)
    text, doc = render_report(recs, config)
    sys.stdout.write(doc if args.json else text)
    return 0


def cmd_evaluate(args) -> int:
    ds = read_dataset(args.dataset)
    spec = protocol_spec(args.experiment, ds, train_input=args.train_input)
    outcomes = run_experiment(ds, spec, args.learner, args.k)
    summary = accuracy_summary(outcomes, args.experiment, args.learner)
    prefix = str(args.report)
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    export_ratios_csv(outcomes, prefix + "_ratios.csv")
    write_summary_json(summary, prefix + "_accuracy.json")
    for opt, acc in summary["per_optimization"].items():
        print(f"{opt}\t{acc['percent']:.1f}% ({acc['correct']}/{acc['total']})")
    print(f"overall sign accuracy: {sign_accuracy(outcomes).percent:.1f}")
    return 0


def cmd_synth(args) -> int:
    ds = generate_synthetic_dataset(seed=args.seed, programs=tuple(args.programs), n_opts=args.n_opts,
                                    runs=args.runs, inputs=args.inputs, noise_level=args.noise)
    out = write_dataset(ds, args.out)
    print(f"wrote {len(ds.records)} records for {', '.join(ds.programs)} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optadvisor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    db = sub.add_parser("db", help="inspect or edit the optimization database")
    db_sub = db.add_subparsers(dest="db_command", required=True)
    p = db_sub.add_parser("list")
    p.add_argument("--db", required=True)
    p = db_sub.add_parser("add", help="copy an entry directory into the database")
    p.add_argument("--db", required=True)
    p.add_argument("--source", required=True, help="directory holding manifest.json and profiles/")
    p = db_sub.add_parser("remove")
    p.add_argument("--db", required=True)
    p.add_argument("id")
    p = db_sub.add_parser("import", help="create entries from a profiled dataset directory")
    p.add_argument("--db", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--program", action="append", help="restrict to program (repeatable)")
    p.add_argument("--input", action="append", help="restrict to input id (repeatable)")
    p.add_argument("--run", action="append", type=int, help="restrict to run id (repeatable)")
    db.set_defaults(func=cmd_db)

    p = sub.add_parser("train", help="train one model per database entry")
    p.add_argument("--db", required=True)
    p.add_argument("--learner", choices=LEARNER_KINDS, required=True)
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", help="rank optimizations for a profiled kernel")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--kernel")
    p.add_argument("--top", type=_positive_int, default=DEFAULT_MAX_COUNT)
    p.add_argument("--threshold", type=_non_negative_float, default=DEFAULT_THRESHOLD)
    p.add_argument("--explain", action="store_true", help="include descriptions")
    p.add_argument("--examples", action="store_true", help="include examples")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("evaluate", help="run one train/test experiment protocol")
    p.add_argument("--dataset", required=True)
    p.add_argument("--experiment", type=int, choices=range(1, 7), required=True)
    p.add_argument("--learner", choices=LEARNER_KINDS, required=True)
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--train-input")
    p.add_argument("--report", required=True, help="output prefix for _ratios.csv and _accuracy.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic profiled dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=_non_negative_float, default=0.02)
    p.add_argument("--programs", nargs="+", default=["BH", "NB"])
    p.add_argument("--n-opts", type=int, choices=range(1, 17), default=6, metavar="N")
    p.add_argument("--runs", type=_positive_int, default=3)
    p.add_argument("--inputs", type=_positive_int, help="inputs per program (default: per-program table)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except AdvisorError as exc:
        print(f"optadvisor: error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"optadvisor: error[E_IO]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
