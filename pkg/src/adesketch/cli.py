"""Command-line harness: build, query, audit, attack, bench.

Every output file starts with a comment header naming the tool version, the
resolved configuration, and the master seed, so any run can be reproduced
exactly. All randomness flows from --seed through labeled substreams.

Exit codes: 0 success, 2 accuracy-verification failure, 3 ingestion error,
4 capacity error.
"""

import os
import sys
import tempfile
import time

import click
import numpy as np
from joblib import Parallel, delayed

from . import __version__, adversary, core
from .datasets import load_dataset
from .errors import CapacityError, IngestionError, StructureFormatError
from .rng import ATTACK_STREAM, DATA_STREAM, QUERY_STREAM, substream, validate_seed
from .stable import DEFAULT_CALIBRATION_SAMPLES, MedPTable, StableParams

EXIT_VERIFICATION = 2
EXIT_INGESTION = 3
EXIT_CAPACITY = 4


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _header_lines(command, config, seed):
    resolved = " ".join(f"{key}={value}" for key, value in config.items())
    return [
        f"# adesketch {__version__}",
        f"# command: {command}",
        f"# config: {resolved}",
        f"# seed: {seed}",
    ]


def _write_atomic(path, lines):
    """Write text output as temp + rename so readers never see partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sub_seed(master_seed, *path):
    """Derive a 64-bit child seed for components that take integer seeds."""
    return int(substream(master_seed, *path).integers(0, 2**64, dtype=np.uint64))


@click.group()
@click.version_option(__version__)
def main():
    """Adaptive-query-safe distance estimation over lp norms."""


@main.command("build")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--p", type=float, default=2.0, show_default=True, help="Norm index; 2.0 uses the Gaussian path.")
@click.option("--epsilon", type=float, default=0.25, show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--c-m", type=float, default=40.0, show_default=True)
@click.option("--c-l", type=float, default=1.0, show_default=True)
@click.option("--c-r", type=float, default=3.0, show_default=True)
@click.option("--l-max", type=int, default=None, help="Cap the ensemble size.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--med-table", "med_table_path", type=click.Path(dir_okay=False), default=None,
              help="Med_p table file; read if present, updated when calibration runs.")
@click.option("--calibration-samples", type=int, default=DEFAULT_CALIBRATION_SAMPLES, show_default=True)
@click.option("--memory-cap", type=int, default=core.DEFAULT_MEMORY_CAP, show_default=True,
              help="Refuse allocations beyond this many bytes.")
def cmd_build(data_path, out_path, p, epsilon, delta, c_m, c_l, c_r, l_max, seed,
              med_table_path, calibration_samples, memory_cap):
    """Build a sketch-ensemble structure from a dataset and persist it."""
    validate_seed(seed)
    try:
        dataset = load_dataset(data_path)
    except IngestionError as exc:
        _fail(EXIT_INGESTION, exc)
    params = core.AdeParams(p=p, epsilon=epsilon, delta=delta, c_m=c_m, c_l=c_l,
                            c_r=c_r, master_seed=seed, l_max=l_max)

    med_table = None
    if p < 2.0:
        if med_table_path and os.path.exists(med_table_path):
            med_table = MedPTable.load(med_table_path)
        else:
            med_table = MedPTable.with_closed_forms()
        if p not in med_table:
            click.echo(f"calibrating Med_p for p={p} ({calibration_samples} samples)")
            med_table.calibrate(StableParams(p), seed=seed, n_samples=calibration_samples)
            if med_table_path:
                med_table.save(med_table_path)

    try:
        structure = core.build(dataset.rows, params, med_table=med_table,
                               memory_cap_bytes=memory_cap)
    except CapacityError as exc:
        _fail(EXIT_CAPACITY, exc)
    core.save_structure(structure, out_path)
    r = core.derive_r(params, structure.n)
    click.echo(f"built: n={structure.n} d={structure.d} m={structure.m} l={structure.l} r={r}")
    click.echo(f"memory: {structure.memory_bytes() / 2**20:.1f} MiB "
               f"({structure.l}x{structure.m}x{structure.d} matrix floats + "
               f"{structure.n}x{structure.l}x{structure.m} sketch floats)")
    click.echo(f"wrote {out_path}")


def _load_structure_or_fail(path):
    try:
        return core.load_structure(path)
    except StructureFormatError as exc:
        _fail(EXIT_INGESTION, exc)


@main.command("query")
@click.option("--structure", "structure_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--verify", "verify_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Original dataset; brute-force check that every estimate is within (1 +- epsilon).")
def cmd_query(structure_path, queries_path, seed, out_path, verify_path):
    """Estimate distances from each query vector to every stored point."""
    validate_seed(seed)
    structure = _load_structure_or_fail(structure_path)
    try:
        queries = load_dataset(queries_path, allow_empty=True).rows
    except IngestionError as exc:
        _fail(EXIT_INGESTION, exc)
    if queries.size == 0:
        queries = queries.reshape(0, structure.d)

    rng = substream(seed, QUERY_STREAM)
    results = core.query_repeated(structure, queries, rng, keep_samples=False)

    config = {
        "structure": structure_path, "queries": queries_path,
        "p": structure.params.p, "epsilon": structure.params.epsilon,
        "delta": structure.params.delta, "n": structure.n, "d": structure.d,
        "m": structure.m, "l": structure.l,
    }
    lines = _header_lines("query", config, seed)
    lines.append("point_index,estimate")
    for qi, res in enumerate(results):
        sampled = ",".join(str(int(j)) for j in res.sampled_indices)
        lines.append(f"# query {qi} sampled_indices={sampled}")
        for i, est in enumerate(res.estimates):
            lines.append(f"{i},{float(est)!r}")
    _write_atomic(out_path, lines)
    click.echo(f"wrote {out_path} ({len(results)} queries x {structure.n} points)")

    if verify_path is not None:
        try:
            reference = load_dataset(verify_path).rows
        except IngestionError as exc:
            _fail(EXIT_INGESTION, exc)
        if reference.shape != (structure.n, structure.d):
            _fail(EXIT_INGESTION,
                  f"verification dataset is {reference.shape}, structure holds "
                  f"{structure.n}x{structure.d}")
        eps = structure.params.epsilon
        violations = []
        for qi, (res, q) in enumerate(zip(results, queries)):
            exact = core.exact_distances(reference, q, structure.params.p)
            low, high = (1 - eps) * exact, (1 + eps) * exact
            bad = np.flatnonzero((res.estimates < low) | (res.estimates > high))
            violations.extend(
                (qi, int(i), float(res.estimates[i]), float(exact[i])) for i in bad
            )
        if violations:
            for qi, i, est, true in violations:
                click.echo(f"violation: query {qi} point {i}: estimate {est!r} vs exact {true!r}", err=True)
            _fail(EXIT_VERIFICATION, f"{len(violations)} estimate(s) outside (1 +- {eps}) of exact")
        click.echo(f"verified: all estimates within (1 +- {eps}) of exact distances")


@main.command("audit")
@click.option("--structure", "structure_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--directions", "n_directions", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_audit(structure_path, n_directions, seed, out_path):
    """Check that >= 90% of the ensemble estimates random unit directions well."""
    validate_seed(seed)
    structure = _load_structure_or_fail(structure_path)
    counts = core.representativeness_counts(structure, n_directions,
                                            substream(seed, DATA_STREAM))
    threshold = 0.9 * structure.l
    config = {
        "structure": structure_path, "directions": n_directions,
        "p": structure.params.p, "epsilon": structure.params.epsilon,
        "l": structure.l, "threshold": threshold,
    }
    lines = _header_lines("audit", config, seed)
    lines.append("direction,count")
    lines.extend(f"{i},{int(c)}" for i, c in enumerate(counts))
    if out_path:
        _write_atomic(out_path, lines)
    click.echo(f"directions={n_directions} l={structure.l} min_count={counts.min()} "
               f"mean_count={counts.mean():.2f} threshold={threshold:.1f}")
    if (counts < threshold).any():
        worst = int(np.argmin(counts))
        _fail(EXIT_VERIFICATION,
              f"direction {worst} estimated well by only {counts[worst]} of "
              f"{structure.l} matrices (threshold {threshold:.1f})")
    click.echo("audit passed")


def _build_attack_oracle(kind, d, k, epsilon, delta, l_max, memory_cap, seed, rep, role):
    points = adversary.attack_points(d)
    if kind == "exact":
        return adversary.ExactOracle(points)
    if kind == "naivejl":
        return adversary.NaiveJLOracle(points, k, substream(seed, ATTACK_STREAM, rep, 0))
    params = core.AdeParams(p=2.0, epsilon=epsilon, delta=delta,
                            master_seed=_sub_seed(seed, ATTACK_STREAM, rep, 0),
                            l_max=l_max)
    structure = core.build(points, params, memory_cap_bytes=memory_cap)
    return adversary.AdeOracle(structure, substream(seed, ATTACK_STREAM, rep, 1, role))


def _attack_rep(kind, d, k, epsilon, delta, l_max, memory_cap, rounds, eval_every, seed, rep):
    adaptive_oracle = _build_attack_oracle(kind, d, k, epsilon, delta, l_max, memory_cap, seed, rep, 0)
    trace = adversary.run_attack(adaptive_oracle, rounds, eval_every,
                                 substream(seed, ATTACK_STREAM, rep, 2))
    baseline_oracle = _build_attack_oracle(kind, d, k, epsilon, delta, l_max, memory_cap, seed, rep, 1)
    baseline = adversary.random_query_baseline(baseline_oracle, rounds, eval_every,
                                               substream(seed, ATTACK_STREAM, rep, 3))
    return trace, baseline


@main.command("attack")
@click.option("--oracle", "oracle_kind", type=click.Choice(["naivejl", "ade", "exact"]),
              default="naivejl", show_default=True)
@click.option("--d", type=int, default=2000, show_default=True)
@click.option("--k", type=int, default=100, show_default=True, help="Sketch rows for the naive oracle.")
@click.option("--epsilon", type=float, default=0.25, show_default=True, help="Accuracy for the ade oracle.")
@click.option("--delta", type=float, default=0.01, show_default=True, help="Failure probability for the ade oracle.")
@click.option("--l-max", type=int, default=64, show_default=True, help="Ensemble cap for the ade oracle.")
@click.option("--rounds", type=int, default=2000, show_default=True)
@click.option("--eval-every", type=int, default=100, show_default=True)
@click.option("--reps", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", required=True, help="Prefix for per-repetition trace CSVs and the summary CSV.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Concurrent repetitions.")
@click.option("--memory-cap", type=int, default=core.DEFAULT_MEMORY_CAP, show_default=True)
def cmd_attack(oracle_kind, d, k, epsilon, delta, l_max, rounds, eval_every, reps, seed,
               out_prefix, jobs, memory_cap):
    """Run the adaptive attack and its random baseline against an oracle."""
    validate_seed(seed)
    config = {
        "oracle": oracle_kind, "d": d, "k": k, "epsilon": epsilon, "delta": delta,
        "l_max": l_max, "rounds": rounds, "eval_every": eval_every, "reps": reps,
    }
    try:
        pairs = Parallel(n_jobs=jobs)(
            delayed(_attack_rep)(oracle_kind, d, k, epsilon, delta, l_max, memory_cap,
                                 rounds, eval_every, seed, rep)
            for rep in range(reps)
        )
    except CapacityError as exc:
        _fail(EXIT_CAPACITY, exc)

    header = _header_lines("attack", config, seed)
    for rep, (trace, baseline) in enumerate(pairs):
        _write_atomic(f"{out_prefix}_adaptive_rep{rep}.csv",
                      header + adversary.trace_csv_lines(trace))
        _write_atomic(f"{out_prefix}_random_rep{rep}.csv",
                      header + adversary.trace_csv_lines(baseline))

    eval_rounds = [rec.round for rec in pairs[0][0].records]
    adaptive_ratios = np.array([[rec.ratio for rec in trace.records] for trace, _ in pairs])
    random_ratios = np.array([[rec.ratio for rec in baseline.records] for _, baseline in pairs])
    summary = header + ["round,adaptive_median_ratio,random_median_ratio"]
    for idx, rnd in enumerate(eval_rounds):
        summary.append(
            f"{rnd},{float(np.median(adaptive_ratios[:, idx]))!r},"
            f"{float(np.median(random_ratios[:, idx]))!r}"
        )
    _write_atomic(f"{out_prefix}_summary.csv", summary)
    click.echo(f"final adaptive median ratio: {float(np.median(adaptive_ratios[:, -1])):.3f}")
    click.echo(f"final random median ratio:   {float(np.median(random_ratios[:, -1])):.3f}")
    click.echo(f"wrote {2 * reps} trace files and {out_prefix}_summary.csv")


@main.command("bench")
@click.option("--n-list", default="1000,2000,4000", show_default=True)
@click.option("--d-list", default="64", show_default=True)
@click.option("--p", type=float, default=2.0, show_default=True)
@click.option("--epsilon", type=float, default=0.5, show_default=True)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--queries-per-cell", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--memory-cap", type=int, default=core.DEFAULT_MEMORY_CAP, show_default=True)
def cmd_bench(n_list, d_list, p, epsilon, delta, queries_per_cell, seed, out_path, memory_cap):
    """Time build and query across a grid of (n, d) sizes.

    Cells run sequentially so wall-time ratios stay meaningful.
    """
    validate_seed(seed)
    try:
        n_values = [int(x) for x in n_list.split(",") if x.strip()]
        d_values = [int(x) for x in d_list.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("size lists must be comma-separated integers")
    config = {"n_list": n_list, "d_list": d_list, "p": p, "epsilon": epsilon,
              "delta": delta, "queries_per_cell": queries_per_cell}
    rows = []
    for d in d_values:
        for n in n_values:
            data_rng = substream(seed, DATA_STREAM, d, n)
            points = data_rng.standard_normal((n, d))
            params = core.AdeParams(p=p, epsilon=epsilon, delta=delta,
                                    master_seed=_sub_seed(seed, DATA_STREAM, d, n, 1))
            t0 = time.perf_counter()
            try:
                structure = core.build(points, params, memory_cap_bytes=memory_cap)
            except CapacityError as exc:
                _fail(EXIT_CAPACITY, exc)
            build_ms = (time.perf_counter() - t0) * 1e3
            query_rng = substream(seed, QUERY_STREAM, d, n)
            times = []
            for _ in range(queries_per_cell):
                q = data_rng.standard_normal(d)
                t0 = time.perf_counter()
                core.query(structure, q, query_rng, keep_samples=False)
                times.append((time.perf_counter() - t0) * 1e3)
            r = core.derive_r(params, n)
            rows.append((n, d, structure.m, structure.l, r, build_ms, float(np.median(times))))
            click.echo(f"n={n} d={d} m={structure.m} l={structure.l} r={r} "
                       f"build={build_ms:.1f}ms query={np.median(times):.2f}ms")
    lines = _header_lines("bench", config, seed)
    lines.append("n,d,m,l,r,build_ms,query_ms")
    lines.extend(f"{n},{d},{m},{l},{r},{bms!r},{qms!r}" for n, d, m, l, r, bms, qms in rows)
    _write_atomic(out_path, lines)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
