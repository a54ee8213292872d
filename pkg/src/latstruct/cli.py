"""Command-line front end.

Subcommands cover each pipeline stage individually plus the end-to-end
``pipeline`` run.  Stage outputs are JSON files designed to compose:
``learn | invert | discriminate | export-nn`` through files equals one
``pipeline`` invocation.  All failures exit nonzero with a one-line JSON
error on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import LatstructError
from .export import ArchitectureSpec, ExportConfig, export_architecture, validate_architecture
from .graphs import dump_graph_json, load_graph_json
from .independence import (
    DataIndependenceSource,
    Dataset,
    load_dataset,
    parse_schema_override,
    save_dataset,
)
from .inverse import (
    DiscriminativeGraph,
    InverseGraph,
    build_discriminative,
    build_stochastic_inverse,
    verify_preservation,
)
from .learner import JsonlTrace, LatentStructure, learn_structure
from .independence import OracleIndependenceSource
from .synth import ancestral_sample, load_bn_json


def _fail(exc: BaseException) -> None:
    sys.stderr.write(
        json.dumps({"error": str(exc), "kind": type(exc).__name__}) + "\n"
    )
    sys.exit(1)


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (LatstructError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _build_source(input_path: str, schema: str | None, test: str, alpha: float, trace):
    if test == "oracle":
        dag = load_graph_json(Path(input_path).read_text(encoding="utf-8"))
        return OracleIndependenceSource(dag, trace=trace)
    overrides = (
        parse_schema_override(Path(schema).read_text(encoding="utf-8")) if schema else None
    )
    dataset = load_dataset(input_path, overrides)
    kind = {"g2": "g2", "fisher-z": "fisher_z"}[test]
    return DataIndependenceSource(dataset, test=kind, alpha=alpha, trace=trace)


def _learn_stage(input_path, schema, test, alpha, out: Path) -> LatentStructure:
    with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
        trace = JsonlTrace(fh)
        src = _build_source(input_path, schema, test, alpha, trace)
        result = learn_structure(src, trace=trace)
    _write(out / "generative.json", json.dumps(result.structure.to_dict(), indent=2, sort_keys=True) + "\n")
    return result.structure


input_opt = click.option("--input", "input_path", required=True, help="input file")
schema_opt = click.option("--schema", default=None, help="schema override JSON")
test_opt = click.option(
    "--test", default="g2", type=click.Choice(["g2", "fisher-z", "oracle"])
)
alpha_opt = click.option("--alpha", default=0.01, show_default=True)
width_opt = click.option("--width", default=32, show_default=True, help="neurons per dense layer")
classes_opt = click.option("--classes", default=2, show_default=True)
seed_opt = click.option("--seed", default=0, show_default=True)
out_opt = click.option("--out", required=True, help="output directory")
maxcond_opt = click.option("--max-cond", default=3, show_default=True)


@click.group()
def main():
    """Learn deep latent structure and export it as a neural architecture."""


@main.command()
@input_opt
@schema_opt
@test_opt
@alpha_opt
@out_opt
def learn(input_path, schema, test, alpha, out):
    """Learn the generative latent structure from data or an oracle DAG."""
    out = _outdir(out)
    _run(_learn_stage, input_path, schema, test, alpha, out)
    click.echo(str(out / "generative.json"))


@main.command()
@input_opt
@out_opt
def invert(input_path, out):
    """Construct the stochastic inverse of a generative structure."""
    out = _outdir(out)

    def stage():
        structure = LatentStructure.from_dict(
            json.loads(Path(input_path).read_text(encoding="utf-8"))
        )
        inv = build_stochastic_inverse(structure)
        _write(out / "inverse.json", json.dumps(inv.to_dict(), indent=2, sort_keys=True) + "\n")

    _run(stage)
    click.echo(str(out / "inverse.json"))


@main.command()
@input_opt
@out_opt
def discriminate(input_path, out):
    """Add the class node and build the discriminative graph."""
    out = _outdir(out)

    def stage():
        inv = InverseGraph.from_dict(json.loads(Path(input_path).read_text(encoding="utf-8")))
        disc = build_discriminative(inv)
        _write(
            out / "discriminative.json",
            json.dumps(disc.to_dict(), indent=2, sort_keys=True) + "\n",
        )

    _run(stage)
    click.echo(str(out / "discriminative.json"))


@main.command("export-nn")
@input_opt
@width_opt
@classes_opt
@out_opt
def export_nn(input_path, width, classes, out):
    """Export a discriminative graph as an architecture description."""
    out = _outdir(out)

    def stage():
        disc = DiscriminativeGraph.from_dict(
            json.loads(Path(input_path).read_text(encoding="utf-8"))
        )
        spec = export_architecture(disc, cfg=ExportConfig(width, classes))
        report = validate_architecture(spec)
        if not report.ok:
            raise LatstructError("; ".join(report.failures))
        _write(out / "architecture.json", spec.to_json())

    _run(stage)
    click.echo(str(out / "architecture.json"))


@main.command()
@click.option("--input", "input_path", required=True, help="directory with stage artifacts")
@maxcond_opt
@out_opt
def verify(input_path, max_cond, out):
    """Check dependency preservation across the three learned graphs."""
    out = _outdir(out)

    def stage():
        src = Path(input_path)
        structure = LatentStructure.from_dict(
            json.loads((src / "generative.json").read_text(encoding="utf-8"))
        )
        inv = InverseGraph.from_dict(
            json.loads((src / "inverse.json").read_text(encoding="utf-8"))
        )
        disc = DiscriminativeGraph.from_dict(
            json.loads((src / "discriminative.json").read_text(encoding="utf-8"))
        )
        report = verify_preservation(structure, inv, disc, max_condition_size=max_cond)
        _write(
            out / "verification.json",
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        )

    _run(stage)
    click.echo(str(out / "verification.json"))


@main.command()
@input_opt
@click.option("--rows", default=1000, show_default=True)
@seed_opt
@out_opt
def sample(input_path, rows, seed, out):
    """Draw ancestral samples from a Bayesian-network JSON file."""
    out = _outdir(out)

    def stage():
        bn = load_bn_json(Path(input_path).read_text(encoding="utf-8"))
        dataset = ancestral_sample(bn, rows, seed)
        save_dataset(dataset, out / "data.csv")

    _run(stage)
    click.echo(str(out / "data.csv"))


@main.command()
@input_opt
@schema_opt
@test_opt
@alpha_opt
@width_opt
@classes_opt
@seed_opt
@out_opt
@click.option("--verify", "run_verify", is_flag=True, default=False)
@maxcond_opt
def pipeline(input_path, schema, test, alpha, width, classes, seed, out, run_verify, max_cond):
    """Run learn -> invert -> discriminate -> export-nn (and optionally verify)."""
    out = _outdir(out)

    def stage():
        structure = _learn_stage(input_path, schema, test, alpha, out)
        inv = build_stochastic_inverse(structure)
        _write(out / "inverse.json", json.dumps(inv.to_dict(), indent=2, sort_keys=True) + "\n")
        disc = build_discriminative(inv)
        _write(
            out / "discriminative.json",
            json.dumps(disc.to_dict(), indent=2, sort_keys=True) + "\n",
        )
        spec = export_architecture(disc, cfg=ExportConfig(width, classes))
        report = validate_architecture(spec)
        if not report.ok:
            raise LatstructError("; ".join(report.failures))
        _write(out / "architecture.json", spec.to_json())
        if run_verify:
            vreport = verify_preservation(structure, inv, disc, max_condition_size=max_cond)
            _write(
                out / "verification.json",
                json.dumps(vreport.to_dict(), indent=2, sort_keys=True) + "\n",
            )

    _run(stage)
    click.echo(str(out))


if __name__ == "__main__":
    main()
