"""Multi-objective neuroevolution search for mixed-precision quantization."""

import json

from . import _nemo
from ._nemo import (
    ConfigError,
    ContractError,
    Workload,
    allocate_sizes,
    benchmark_evaluate,
    dominates,
    load_workload,
    non_dominated_sort,
    quantize,
    r2_indicator,
    train_reference,
    ucb_scores,
    uniform_weight_vectors,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Workload",
    "allocate_sizes",
    "benchmark_evaluate",
    "dominates",
    "load_workload",
    "non_dominated_sort",
    "oracle",
    "quantize",
    "r2_indicator",
    "run_search",
    "train_reference",
    "ucb_scores",
    "uniform_weight_vectors",
    "workload_metadata",
]


def workload_metadata(workload):
    return json.loads(workload.metadata)


def oracle(workload, bits=(2, 4, 8), top_k=1, threads=1):
    """Exact Pareto set of a small space, one dict per row."""
    return json.loads(_nemo.oracle(workload, list(bits), top_k, threads))


def run_search(config=None, out_dir=""):
    """Run a search from a config dict (same keys as run.json).

    Returns a dict with rows, metadata, per-generation history and the csv text.
    Files are written only when out_dir is given.
    """
    return json.loads(_nemo.run_search(json.dumps(config or {}), str(out_dir)))
