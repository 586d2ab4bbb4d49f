"""``bnnqubo`` command line.

Exit codes: 0 success, 2 usage, 3 capacity, 4 embedding not found,
5 IO or parse error.  Every command is deterministic given ``--seed``
apart from recorded timings.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import qubo as qubo_io
from .bench import run_scaling_suite, run_type_suite, summarize, write_records
from .bnn import BnnArchitecture, LabeledDataset, distance, enumerate_optimal_weights
from .builder import (
    BuildOptions,
    audit,
    build_training_qubo,
    decode_weights,
    instance_bundle,
    load_instance_bundle,
)
from .dataio import Instance, parse_sparse, sample_instances, synthetic_adult_like
from .embedding import (
    ChainEmbedding,
    HardwareGraph,
    embed_qubo,
    find_embedding,
    generate_topology,
    load_topology,
    unembed,
)
from .errors import CapacityError, EmbeddingNotFound, ParseError
from .solvers import Sample, SampleSet, SaSchedule, solve_exhaustive, solve_sa

EXIT_USAGE = 2
EXIT_CAPACITY = 3
EXIT_EMBEDDING = 4
EXIT_IO = 5

EMBEDDED_SCHEMA = "bnnqubo.embedded/1"


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, path) from None


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=False)
        fh.write("\n")


def _load_qubo(path):
    """A QUBO from a build bundle, an embedded bundle, QUBO JSON or QUBO text."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.lstrip().startswith("{"):
        return qubo_io.loads_text(text, path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    schema = data.get("schema", "")
    if schema.startswith("bnnqubo.instance"):
        return qubo_io.from_dict(data["qubo"], path)
    if schema == EMBEDDED_SCHEMA:
        return qubo_io.from_dict(data["qubo"], path)
    return qubo_io.from_dict(data, path)


def _load_dataset(path) -> tuple[LabeledDataset, dict]:
    data = _read_json(path)
    if "data" in data:
        inst = Instance.from_json(data)
        meta = {"attributes": inst.attributes, "rows": inst.rows, "seed": inst.seed,
                "index": inst.index, **inst.metadata}
        return inst.data, meta
    return LabeledDataset.from_json(data), {}


def _topology(spec: str) -> HardwareGraph:
    if os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            return load_topology(fh.read(), spec)
    return generate_topology(spec)


@click.group()
def cli():
    """Compile BNN training into QUBOs, solve, embed and evaluate."""


@cli.command("gen-data")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None,
              help="LIBSVM-style sparse file; a synthetic stand-in is used when omitted.")
@click.option("--attrs", default=3, show_default=True)
@click.option("--points", default=4, show_default=True)
@click.option("--count", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def gen_data(input_path, attrs, points, count, seed, out_dir):
    """Sample training instances and write one JSON bundle each."""
    ds = parse_sparse(input_path) if input_path else synthetic_adult_like(seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    for inst in sample_instances(ds, attrs, points, count, seed):
        path = os.path.join(out_dir, f"instance_{inst.index:03d}.json")
        _write_json(path, {"schema": "bnnqubo.data/1", **inst.to_json()})
        click.echo(f"{path} attributes={inst.attributes} rows={inst.rows} "
                   f"conflicts={inst.metadata['conflicts']}")


@cli.command()
@click.option("--instance", "instance_path", required=True, type=click.Path(dir_okay=False))
@click.option("--arch", default="3-3-1", show_default=True)
@click.option("--penalty", default=50, show_default=True)
@click.option("--fold/--no-fold", default=False, show_default=True,
              help="Replace layer-0 products by (negated) weight bits.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def build(instance_path, arch, penalty, fold, out):
    """Build the training QUBO for one instance."""
    architecture = BnnArchitecture.parse(arch)
    ds, meta = _load_dataset(instance_path)
    opts = BuildOptions(penalty=penalty, fold_constant_inputs=fold)
    q, _ = build_training_qubo(architecture, ds, opts)
    _write_json(out, instance_bundle(architecture, ds, opts, q, meta))
    click.echo(f"arch={architecture} penalty={penalty} fold={fold} "
               f"variables={q.num_vars} terms={q.num_terms}")


@cli.command()
@click.option("--qubo", "qubo_path", required=True, type=click.Path(dir_okay=False))
@click.option("--solver", type=click.Choice(["exhaustive", "sa"]), default="sa", show_default=True)
@click.option("--sweeps", default=1000, show_default=True)
@click.option("--restarts", default=20, show_default=True)
@click.option("--t-start", type=float, default=None)
@click.option("--t-end", type=float, default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def solve(qubo_path, solver, sweeps, restarts, t_start, t_end, seed, out):
    """Minimise a QUBO and write the sample set."""
    q = _load_qubo(qubo_path)
    if solver == "exhaustive":
        ss = solve_exhaustive(q)
    else:
        ss = solve_sa(q, SaSchedule(sweeps, restarts, t_start, t_end, seed))
    _write_json(out, ss.to_json())
    click.echo(f"solver={solver} best_energy={ss.first.energy} samples={len(ss)} "
               f"time_s={ss.wall_time:.3f}")


@cli.command()
@click.option("--qubo", "qubo_path", required=True, type=click.Path(dir_okay=False))
@click.option("--topology", default="chimera:16", show_default=True,
              help="complete:N, grid:WxH, chimera:M[,T] or an edge-list file.")
@click.option("--chain-strength", type=float, default=None,
              help="Defaults to twice the largest absolute coefficient.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def embed(qubo_path, topology, chain_strength, seed, out):
    """Minor-embed a QUBO into a hardware graph."""
    q = _load_qubo(qubo_path)
    hw = _topology(topology)
    emb = find_embedding(q, hw, seed=seed)
    if chain_strength is not None and float(chain_strength).is_integer():
        chain_strength = int(chain_strength)
    eq = embed_qubo(q, emb, hw, chain_strength)
    _write_json(out, {
        "schema": EMBEDDED_SCHEMA,
        "topology": topology,
        "chain_strength": eq.chain_strength,
        "embedding": emb.to_json(),
        "nodes": eq.nodes,
        "logical_qubo": qubo_io.to_dict(q),
        "qubo": qubo_io.to_dict(eq.qubo),
    })
    click.echo(f"qubits={emb.total_qubits()} max_chain={emb.max_chain_length()} "
               f"chain_strength={eq.chain_strength}")


@cli.command("unembed")
@click.option("--embedded", "embedded_path", required=True, type=click.Path(dir_okay=False))
@click.option("--samples", "samples_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def unembed_cmd(embedded_path, samples_path, out):
    """Map physical samples back to logical ones by chain majority vote."""
    bundle = _read_json(embedded_path)
    if bundle.get("schema") != EMBEDDED_SCHEMA:
        raise ParseError("not an embedded-QUBO bundle", None, embedded_path)
    emb = ChainEmbedding.from_json(bundle["embedding"])
    logical = qubo_io.from_dict(bundle["logical_qubo"], embedded_path)
    phys = SampleSet.from_json(_read_json(samples_path))
    samples, fractions = [], []
    for s in phys.samples:
        bits, frac = unembed(s.bits, emb, logical.num_vars)
        samples.append((Sample(bits, logical.energy(bits), s.restart), frac))
    samples.sort(key=lambda t: t[0].sort_key())
    info = dict(phys.info)
    info["unembedded"] = True
    info["chain_break_fractions"] = [f for _, f in samples]
    ss = SampleSet([s for s, _ in samples], phys.wall_time, info)
    _write_json(out, ss.to_json())
    click.echo(f"best_logical_energy={ss.first.energy} "
               f"mean_chain_break_fraction={np.mean(info['chain_break_fractions']):.4f}")


@cli.command()
@click.option("--instance", "instance_path", required=True, type=click.Path(dir_okay=False),
              help="Bundle written by 'build'.")
@click.option("--samples", "samples_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def evaluate(instance_path, samples_path, out):
    """Decode the best sample, audit it and measure its distance to the optimum."""
    arch, ds, _, q, reg = load_instance_bundle(_read_json(instance_path))
    ss = SampleSet.from_json(_read_json(samples_path))
    best = ss.first
    report = audit(best.bits, reg, arch, ds)
    oracle = enumerate_optimal_weights(arch, ds)
    w = decode_weights(best.bits, reg)
    result = {
        "energy": qubo_io._scalar_out(q.energy(best.bits)),
        "weights": w.to_json(),
        "min_loss": oracle.min_loss,
        "distance": distance(w, ds, oracle.min_loss),
        "audit": report.to_json(),
    }
    if out:
        _write_json(out, result)
    click.echo(f"distance={result['distance']} min_loss={oracle.min_loss} "
               f"feasible={report.feasible} violations={report.xnor_violations + report.majority_violations}")


@cli.command()
@click.option("--suite", type=click.Choice(["typeA", "typeB", "scaling"]), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--count", default=20, show_default=True)
@click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", required=True, help="Output prefix: writes PREFIX.csv and PREFIX.json.")
def bench(suite, seed, count, input_path, out):
    """Run a benchmark suite; records are appended to PREFIX.csv."""
    if suite == "scaling":
        records = run_scaling_suite(seed=seed)
    else:
        data = parse_sparse(input_path) if input_path else None
        points = 4 if suite == "typeA" else 8
        records = run_type_suite(points, seed=seed, count=count, data=data)
    write_records(records, out + ".csv")
    summary = summarize(records)
    _write_json(out + ".json", summary)
    for name, g in summary["groups"].items():
        click.echo(f"{name}: n={g['count']} zero_distance={g['zero_distance']}")
    if "scaling_fit" in summary:
        f = summary["scaling_fit"]
        click.echo(f"log2 runtime fit: slope={f['slope']:.3f} r2={f['r2']:.3f}")


def main(argv=None):
    """Entry point mapping package errors onto exit codes."""
    try:
        cli.main(args=argv, prog_name="bnnqubo", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except CapacityError as exc:
        click.echo(f"capacity error: {exc}", err=True)
        return EXIT_CAPACITY
    except EmbeddingNotFound as exc:
        click.echo(f"embedding not found: {exc}", err=True)
        return EXIT_EMBEDDING
    except (OSError, ParseError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_IO
    except ValueError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
