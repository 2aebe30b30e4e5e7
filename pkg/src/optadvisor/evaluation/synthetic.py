"""Deterministic synthetic profile data standing in for real GPU measurements.

Every program version is a bitmask over that program's optimizations. For a
program ``p``, input ``z`` (standardized log problem size) and mask ``v``:

    log rate_c(v)   = base_c(p) + input_sens_c * z + sum_{j in v} shift_c(j)
    log runtime(v)  = log runtime0(p, input)
                      - sum_{j in v} (gain_j + input_slope_j * z)
                      - sum_{i<j in v} interaction(i, j)

so the speedup of adding ``j`` to ``v`` is
``exp(gain_j + input_slope_j * z + sum_{i in v} interaction(i, j))`` and is
a function of what the before-profile reveals. Noise multiplies every rate
and every runtime by ``exp(noise * N(0, 1))``, independently per run.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DatasetError
from ..profile_ingest import SampleRecord, parse_canonical_csv, write_canonical_csv

KERNEL = "force"
CLOCK_CYCLES_PER_MS = 706_000  # 0.706 GHz

# (bodies, time steps) per input, smallest first
PROGRAM_INPUTS = {
    "NB": [(50_000, 2), (100_000, 2), (100_000, 5), (200_000, 5)],
    "BH": [(125_000, 2), (250_000, 2), (250_000, 5), (500_000, 5), (500_000, 10), (1_000_000, 10)],
}
PROGRAM_OPTIMIZATIONS = {
    "NB": ["const", "ftz", "peel", "rsqrt", "shmem", "unroll"],
    "BH": ["ftz", "rsqrt", "sort", "vola", "vote", "warp"],
}

OPTIMIZATION_CATALOG = {
    "const": ("Constant-memory kernel parameters",
              "Copy immutable kernel arguments into constant memory once instead of passing them on every launch.",
              "__constant__ float c_dt;\ncudaMemcpyToSymbol(c_dt, &dt, sizeof(dt));"),
    "ftz": ("Flush denormals to zero",
            "Let the FP32 units treat denormal values as zero, trading a little precision for faster arithmetic.",
            "nvcc -ftz=true ...   // or __fmul_rz-style intrinsics"),
    "peel": ("Loop peeling",
             "Split the inner force loop into a fixed-trip-count part and a remainder part the compiler can treat separately.",
             "for (j = 0; j < full; j += TILE) {...}\nfor (; j < n; j++) {...}"),
    "rsqrt": ("Reciprocal square root intrinsic",
              "Replace 1.0f / sqrtf(x) by the faster rsqrtf(x).",
              "float inv = rsqrtf(d2);"),
    "shmem": ("Shared-memory tiling",
              "Stage tiles of body data in shared memory and compute on them before fetching the next tile.",
              "__shared__ float4 tile[TILE];\ntile[threadIdx.x] = pos[base + threadIdx.x];\n__syncthreads();"),
    "unroll": ("Inner-loop unrolling",
               "Ask the compiler to unroll the innermost loop to expose scheduling freedom.",
               "#pragma unroll 4\nfor (...) {...}"),
    "sort": ("Spatial body sorting",
             "Reorder bodies so spatially close bodies are processed by neighbouring threads.",
             "sortKernel<<<...>>>(...);  // before the force kernel"),
    "vola": ("Volatile caching",
             "Copy volatile values into registers where warp-synchronous execution guarantees they are unchanged.",
             "int v = vol_child[i];  // reuse v instead of re-reading"),
    "vote": ("Warp vote reductions",
             "Use warp vote intrinsics for 32-wide reductions instead of a shared-memory sequence.",
             "if (__all_sync(FULL, pred)) {...}"),
    "warp": ("Warp-based traversal",
             "Traverse per warp instead of per thread, avoiding divergence and per-thread bookkeeping.",
             "if (lane == 0) stack[warp][depth] = node;"),
}

COUNTERS = [
    "branch",
    "divergent_branch",
    "gld_request",
    "gst_request",
    "inst_executed",
    "inst_fp_32",
    "inst_integer",
    "l1_global_load_miss",
    "l2_read_transactions",
    "shared_load",
]
# counters whose rate depends visibly on problem size
_INPUT_SENSITIVE = {"gld_request": 0.45, "l1_global_load_miss": 0.6, "l2_read_transactions": 0.5}


@dataclass
class ProgramInfo:
    optimizations: list[str]
    inputs: list[dict]

    @property
    def input_ids(self) -> list[str]:
        return [i["input_id"] for i in self.inputs]

    def bit(self, opt_id: str) -> int:
        return self.optimizations.index(opt_id)


@dataclass
class ProfileDataset:
    """Records plus the per-program optimization bit layout and input order."""

    records: list[SampleRecord]
    programs: dict[str, ProgramInfo]
    kernel: str = KERNEL
    params: dict = field(default_factory=dict)
    ground_truth: dict | None = None

    def input_rank(self, program: str, input_id: str) -> int:
        return self.programs[program].input_ids.index(input_id)


def _opt_names(program: str, n_opts: int) -> list[str]:
    names = list(PROGRAM_OPTIMIZATIONS.get(program, []))[:n_opts]
    extra = 0
    while len(names) < n_opts:
        candidate = f"opt{len(names) + extra}"
        if candidate in names:
            extra += 1
            continue
        names.append(candidate)
    return names


def _input_list(program: str, count: int) -> list[tuple[int, int]]:
    table = PROGRAM_INPUTS.get(program, PROGRAM_INPUTS["BH"])
    if count <= len(table):
        return table[:count]
    out = list(table)
    while len(out) < count:
        bodies, steps = out[-1]
        out.append((bodies * 2, steps))
    return out


def _input_id(program: str, bodies: int, steps: int) -> str:
    return f"{program}-{bodies // 1000}k-{steps}"


class _EffectModel:
    """Hidden ground truth shared by all programs (per optimization id)."""

    def __init__(self, rng: np.random.Generator, opt_ids: list[str]):
        self.rng = rng
        self.opt_index = {o: i for i, o in enumerate(opt_ids)}
        n, d = len(opt_ids), len(COUNTERS)
        signs = np.where(rng.uniform(size=n) < 0.25, -1.0, 1.0)
        self.gain = signs * rng.uniform(0.08, 0.35, size=n)
        self.input_slope = rng.uniform(-0.04, 0.04, size=n)
        inter = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if rng.uniform() < 0.2:
                    inter[i, j] = inter[j, i] = rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.08)
        self.interaction = inter
        shifts = np.zeros((n, d))
        for i in range(n):
            cols = rng.choice(d, size=3, replace=False)
            shifts[i, cols] = rng.choice([-1.0, 1.0], size=3) * rng.uniform(0.15, 0.5, size=3)
        self.counter_shift = shifts
        self.input_sens = np.array([_INPUT_SENSITIVE.get(c, 0.03) for c in COUNTERS])

    def log_speedup(self, opt_idx: int, applied: list[int], z: float) -> float:
        return float(self.gain[opt_idx] + self.input_slope[opt_idx] * z
                     + sum(self.interaction[opt_idx, i] for i in applied))

    def log_runtime_offset(self, applied: list[int], z: float) -> float:
        total = -sum(self.gain[i] + self.input_slope[i] * z for i in applied)
        for a in range(len(applied)):
            for b in range(a + 1, len(applied)):
                total -= self.interaction[applied[a], applied[b]]
        return float(total)


def generate_synthetic_dataset(
    seed: int = 0,
    programs: tuple[str, ...] = ("BH", "NB"),
    n_opts: int = 6,
    runs: int = 3,
    inputs: dict[str, int] | int | None = None,
    noise_level: float = 0.02,
) -> ProfileDataset:
    if not 1 <= n_opts <= 16:
        raise DatasetError("n_opts must be between 1 and 16")
    if runs < 1:
        raise DatasetError("runs must be >= 1")
    if not (noise_level >= 0 and math.isfinite(noise_level)):
        raise DatasetError("noise_level must be a finite value >= 0")
    if not programs or len(set(programs)) != len(programs):
        raise DatasetError("programs must be a non-empty list of distinct names")
    if inputs is None:
        counts = {p: len(PROGRAM_INPUTS.get(p, PROGRAM_INPUTS["BH"])) for p in programs}
    elif isinstance(inputs, int):
        counts = {p: inputs for p in programs}
    else:
        counts = {p: int(inputs[p]) for p in programs}
    if any(c < 1 for c in counts.values()):
        raise DatasetError("every program needs at least one input")

    rng = np.random.default_rng(seed)
    opt_lists = {p: _opt_names(p, n_opts) for p in programs}
    all_opts = sorted({o for names in opt_lists.values() for o in names})
    effects = _EffectModel(rng, all_opts)
    base_rates = {p: rng.uniform(math.log(0.02), math.log(1.5), size=len(COUNTERS)) for p in programs}
    exponents = {p: (2.0 if p == "NB" else 1.2) for p in programs}

    records: list[SampleRecord] = []
    truth: dict = {}
    infos: dict[str, ProgramInfo] = {}
    noise_rng = np.random.default_rng([seed, 1])
    for p in programs:
        names = opt_lists[p]
        idx = [effects.opt_index[o] for o in names]
        sizes = _input_list(p, counts[p])
        logsize = np.array([math.log(b * s) for b, s in sizes])
        zs = (logsize - logsize.mean()) / (logsize.std() or 1.0)
        info = ProgramInfo(names, [])
        truth[p] = {}
        for (bodies, steps), z in zip(sizes, zs):
            input_id = _input_id(p, bodies, steps)
            info.inputs.append({"input_id": input_id, "bodies": bodies, "time_steps": steps})
            rt0 = 0.5 * (bodies / 1e5) ** exponents[p] * steps
            truth[p][input_id] = {}
            for mask in range(1 << n_opts):
                applied = [idx[b] for b in range(n_opts) if mask >> b & 1]
                log_rates = base_rates[p] + effects.input_sens * z + effects.counter_shift[applied].sum(axis=0)
                log_rt = math.log(rt0) + effects.log_runtime_offset(applied, float(z))
                truth[p][input_id][str(mask)] = {
                    names[b]: math.exp(effects.log_speedup(idx[b], applied, float(z)))
                    for b in range(n_opts) if not mask >> b & 1
                }
                for run in range(runs):
                    jitter_rt = noise_level * noise_rng.standard_normal()
                    jitter_c = noise_level * noise_rng.standard_normal(len(COUNTERS))
                    runtime = round(math.exp(log_rt + jitter_rt), 9)
                    cycles = max(1, round(runtime * CLOCK_CYCLES_PER_MS))
                    rates = np.exp(log_rates + jitter_c)
                    counters = {c: float(round(r * cycles)) for c, r in zip(COUNTERS, rates)}
                    records.append(SampleRecord(p, input_id, run, mask, KERNEL, counters, cycles, runtime))
        infos[p] = info
    params = {"seed": seed, "programs": list(programs), "n_opts": n_opts, "runs": runs,
              "inputs": counts, "noise_level": noise_level}
    return ProfileDataset(records, infos, KERNEL, params, truth)


DATA_CSV = "profiles.csv"
META_JSON = "dataset.json"
TRUTH_JSON = "ground_truth.json"


def _dump_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_dataset(ds: ProfileDataset, out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / DATA_CSV).write_text(write_canonical_csv(ds.records), encoding="utf-8")
    meta = {
        "kernel": ds.kernel,
        "params": ds.params,
        "programs": {p: {"optimizations": i.optimizations, "inputs": i.inputs} for p, i in ds.programs.items()},
    }
    _dump_json(out / META_JSON, meta)
    if ds.ground_truth is not None:
        _dump_json(out / TRUTH_JSON, ds.ground_truth)
    return out


def read_dataset(path: str | os.PathLike) -> ProfileDataset:
    path = Path(path)
    try:
        meta = json.loads((path / META_JSON).read_text(encoding="utf-8"))
        text = (path / DATA_CSV).read_text(encoding="utf-8")
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset at {str(path)!r}: {exc}") from None
    truth = None
    if (path / TRUTH_JSON).exists():
        truth = json.loads((path / TRUTH_JSON).read_text(encoding="utf-8"))
    programs = {p: ProgramInfo(list(v["optimizations"]), list(v["inputs"])) for p, v in meta["programs"].items()}
    return ProfileDataset(parse_canonical_csv(text), programs, meta.get("kernel", KERNEL),
                          meta.get("params", {}), truth)


def dataset_to_entries(ds: ProfileDataset, programs: list[str] | None = None,
                       inputs: list[str] | None = None, runs: list[int] | None = None):
    """Database entries (one per optimization id) holding every before/after pair
    of the selected programs, inputs and runs."""
    from ..optdb import OptimizationEntry, pairs_from_records

    programs = programs or sorted(ds.programs)
    for p in programs:
        if p not in ds.programs:
            raise DatasetError(f"dataset has no program {p!r}")
    records = [r for r in ds.records
               if r.kernel == ds.kernel and r.program in programs
               and (inputs is None or r.input_id in inputs)
               and (runs is None or r.run_id in runs)]
    entries = []
    for opt in sorted({o for p in programs for o in ds.programs[p].optimizations}):
        pairs = []
        for p in programs:
            if opt in ds.programs[p].optimizations:
                pairs.extend(pairs_from_records(records, ds.programs[p].bit(opt), program=p))
        name, description, example = OPTIMIZATION_CATALOG.get(opt, (opt, "", ""))
        entries.append(OptimizationEntry(opt, name, description, example, tuple(pairs)))
    return entries
