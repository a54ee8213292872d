"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the
per-criterion lines as they complete.
"""

import functools
import sys
import time

import pytest
from click.testing import CliRunner

from latstruct.cli import main as cli_main
from latstruct.independence import DataIndependenceSource, OracleIndependenceSource
from latstruct.inverse import (
    build_discriminative,
    build_stochastic_inverse,
    verify_preservation,
)
from latstruct.learner import learn_structure
from latstruct.independence import save_dataset
from latstruct.synth import (
    ancestral_sample,
    random_bn,
    random_latent_structure,
    structural_distance,
    true_cpdag,
)

from conftest import build_toy_dag


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL: {name}", file=sys.stderr)
                raise
            print(f"PASS: {name}", file=sys.stderr)
            return result

        return wrapper

    return deco


GOLDEN_EDGES = {
    ("H0_1", "A"),
    ("H0_1", "H2_1"),
    ("H0_1", "H2_2"),
    ("H0_2", "B"),
    ("H0_2", "H2_1"),
    ("H0_2", "H2_2"),
    ("H2_1", "C"),
    ("H2_1", "E"),
    ("H2_2", "D"),
    ("H2_2", "E"),
}


@criterion("golden two-layer trace recovered edge-for-edge in < 1 s")
def test_golden_trace():
    start = time.perf_counter()
    src = OracleIndependenceSource(build_toy_dag())
    structure = learn_structure(src).structure
    elapsed = time.perf_counter() - start

    assert structure.graph.directed_edges == GOLDEN_EDGES
    assert structure.layers() == {0: ["H0_1", "H0_2"], 2: ["H2_1", "H2_2"]}
    assert structure.gather_groups == [frozenset(c) for c in "ABCDE"]
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


@criterion("dependency preservation: 200 random structures, zero violations; "
           "negative control fires on >= 50% of bidirected instances; < 5 min")
def test_preservation_suite():
    start = time.perf_counter()
    instances = []
    seed = 0
    while len(instances) < 200:
        structure = random_latent_structure(seed)
        seed += 1
        if structure.latent_nodes:
            instances.append(structure)

    with_bidirected = 0
    control_fired = 0
    for structure in instances:
        inv = build_stochastic_inverse(structure)
        disc = build_discriminative(inv)
        report = verify_preservation(structure, inv, disc, max_condition_size=3)
        assert report.violations == [], report.violations[:5]
        if inv.graph.bidirected_edges:
            with_bidirected += 1
            control = verify_preservation(
                structure, inv, disc, max_condition_size=3, condition_on_y=False
            )
            if any(v.prop == 2 for v in control.violations):
                control_fired += 1
    elapsed = time.perf_counter() - start

    assert with_bidirected > 0
    assert control_fired / with_bidirected >= 0.5, (control_fired, with_bidirected)
    assert elapsed < 300.0, f"took {elapsed:.1f}s"


@criterion("large-sample recovery: learned CPDAG within distance 1 of truth "
           "on >= 17/20 seeded networks")
def test_large_sample_recovery():
    hits = 0
    distances = []
    for seed in range(20):
        bn = random_bn(6, 2, 2, seed=seed)
        data = ancestral_sample(bn, 100_000, seed=seed + 1000)
        src = DataIndependenceSource(data, test="g2", alpha=0.01)
        result = learn_structure(src)
        d = structural_distance(result.auxiliary, true_cpdag(bn))
        distances.append(d)
        hits += d <= 1
    assert hits >= 17, f"only {hits}/20 within distance 1: {distances}"


@criterion("pipeline determinism: two runs produce byte-identical artifacts")
def test_pipeline_determinism(tmp_path):
    bn = random_bn(8, 2, 2, seed=77)
    data = ancestral_sample(bn, 20_000, seed=5)
    csv_path = tmp_path / "data.csv"
    save_dataset(data, csv_path)

    artifact_names = [
        "generative.json",
        "inverse.json",
        "discriminative.json",
        "architecture.json",
        "trace.jsonl",
        "verification.json",
    ]
    outs = []
    for tag in ("first", "second"):
        out = tmp_path / tag
        result = CliRunner().invoke(
            cli_main,
            ["pipeline", "--input", str(csv_path), "--test", "g2", "--alpha", "0.01",
             "--width", "16", "--classes", "2", "--out", str(out), "--verify"],
        )
        assert result.exit_code == 0, result.output
        outs.append(out)
    for name in artifact_names:
        first = (outs[0] / name).read_bytes()
        second = (outs[1] / name).read_bytes()
        assert first == second, f"{name} differs between runs"


@criterion("gather partition and layer monotonicity hold on 1000 fuzzed "
           "oracle inputs")
def test_fuzzed_invariants():
    for seed in range(1000):
        n_nodes = 4 + seed % 5
        max_parents = 2 + seed % 2
        bn = random_bn(n_nodes, max_parents, 2, seed=seed)
        src = OracleIndependenceSource(bn.dag)
        result = learn_structure(src)
        # validate() checks the gather partition, the layer monotonicity of
        # every latent edge, acyclicity, and the parentless-root shape
        result.structure.validate()


@criterion("64 variables x 10k rows learn end-to-end in < 60 s")
def test_learning_wall_clock(tmp_path):
    from latstruct.independence import load_dataset

    bn = random_bn(64, 3, 2, seed=99)
    data = ancestral_sample(bn, 10_000, seed=1)
    csv_path = tmp_path / "wide.csv"
    save_dataset(data, csv_path)

    start = time.perf_counter()
    dataset = load_dataset(csv_path)
    src = DataIndependenceSource(dataset, test="g2", alpha=0.01)
    result = learn_structure(src)
    elapsed = time.perf_counter() - start

    result.structure.validate()
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
