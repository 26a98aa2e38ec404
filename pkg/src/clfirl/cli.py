"""Command-line interface.

Subcommands: run (experiment presets or config files), ingest-check,
certify, export, dare.  Exit codes: 0 ok, 1 learner failure, 2 I/O or
config error, 3 certification failure.
"""

import json
import os
import sys

import click
import numpy as np

from .errors import IngestError
from .experiment import (EXIT_CERT, EXIT_IO, EXIT_LEARNER, EXIT_OK,
                         export_plotdata, run_experiment)
from .learner import LearnerConfig
from .lqr import LqrProblem, dare_residual, benchmark_lqr_problem, solve_dare
from .model_io import load_model
from .presets import PRESETS, ExperimentSpec, preset_spec
from .systems import load_linear_system, system_by_name
from .trajectory_io import ingest_trajectories
from .verifier import certify as run_certify


def _parse_override(text):
    """key=value with dotted sections, e.g. learner.margin=0.1."""
    if "=" not in text:
        raise click.BadParameter(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_overrides(overrides):
    tree = {}
    for text in overrides:
        key, value = _parse_override(text)
        parts = key.split(".")
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return tree


def _load_system_for_model(model, system_opt, target_opt, system_file_opt=None):
    path = system_file_opt or model.training_meta.get("system_file")
    if system_opt is None and path:
        return load_linear_system(path)
    name = system_opt or model.training_meta.get("system_name")
    if name is None:
        raise click.ClickException("model does not record its system; pass --system")
    target = target_opt or model.training_meta.get("system_target")
    return system_by_name(name, target=target)


@click.group()
def main():
    """Learn control Lyapunov functions from demonstrations and certify them."""


@main.command()
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None,
              help="Built-in experiment preset.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Experiment spec JSON (overrides preset fields).")
@click.option("--data", "data_path", type=click.Path(), default=None,
              help="Demonstration CSV; replaces the preset generator.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Output directory (default runs/<name>).")
@click.option("--seed", type=int, default=None, help="Top-level seed override.")
@click.option("--set", "overrides", multiple=True,
              help="Spec override key=value (dotted keys reach learner.*/generator.*).")
def run(preset, config_path, data_path, out_dir, seed, overrides):
    """Run an experiment: data, learning, certification, export."""
    tree = _apply_overrides(overrides)
    if seed is not None:
        tree["seed"] = seed
    if data_path is not None:
        tree["data_file"] = data_path
    try:
        if config_path is not None:
            with open(config_path, encoding="utf-8") as fh:
                base = json.load(fh)
            if preset is not None:
                spec = preset_spec(preset, overrides={**base, **tree})
            else:
                for key, value in tree.items():
                    if isinstance(value, dict):
                        base.setdefault(key, {}).update(value)
                    else:
                        base[key] = value
                spec = ExperimentSpec.from_dict(base)
        elif preset is not None:
            spec = preset_spec(preset, overrides=tree)
        else:
            raise click.UsageError("pass --preset and/or --config")
        if spec.data_file and not os.path.exists(spec.data_file):
            click.echo(f"error: data file not found: {spec.data_file}", err=True)
            sys.exit(EXIT_IO)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)

    out_dir = out_dir or f"runs/{spec.name}"
    result = run_experiment(spec, out_dir)
    for name, outcome in result.stages:
        click.echo(f"{name}: {outcome}")
    if result.error:
        click.echo(f"error: {result.error}", err=True)
    elif result.report is not None:
        click.echo(f"certification: {'PASS' if result.report.passed else 'FAIL'} "
                   f"(worst margin {result.report.worst_margin:.4g}, "
                   f"convergence {result.report.mc_fraction:.0%})")
        click.echo(f"artifacts: {result.out_dir}")
    sys.exit(result.exit_code)


@main.command("ingest-check")
@click.argument("path", type=click.Path())
@click.option("--system", "system_name", type=click.Choice(["lqr", "nonlinear2d"]),
              default=None)
@click.option("--system-file", type=click.Path(), default=None,
              help="JSON coefficient file for a linear system.")
@click.option("--target", type=float, nargs=2, default=None)
def ingest_check(path, system_name, system_file, target):
    """Validate a trajectory CSV against a system's bounds."""
    try:
        if system_file is not None:
            system = load_linear_system(system_file)
        elif system_name is not None:
            system = system_by_name(system_name, target=list(target) if target else None)
        else:
            raise click.UsageError("pass --system or --system-file")
        trajectories = ingest_trajectories(path, system)
    except (IngestError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    n_transitions = sum(len(t) - 1 for t in trajectories)
    click.echo(f"{path}: {len(trajectories)} trajectories, "
               f"{n_transitions} transition pairs, all states in bounds")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("model_path", type=click.Path())
@click.option("--system", "system_name", default=None)
@click.option("--target", type=float, nargs=2, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--rollouts", type=int, default=100)
@click.option("--horizon", type=int, default=500)
@click.option("--refinement", type=int, default=4)
@click.option("--seed", type=int, default=0)
def certify(model_path, system_name, target, out_path, rollouts, horizon, refinement, seed):
    """Re-run the certification audits on a saved model."""
    try:
        model = load_model(model_path)
        system = _load_system_for_model(model, system_name, list(target) if target else None)
    except (OSError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    config = LearnerConfig(**{**model.config_echo, "decrease_bounds": None})
    pm = config.perturbation(system)
    report = run_certify(model, system, pm, refinement=refinement,
                         n_rollouts=rollouts, horizon=horizon, seed=seed)
    click.echo(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    sys.exit(EXIT_OK if report.passed else EXIT_CERT)


@main.command()
@click.argument("model_path", type=click.Path())
@click.option("--system", "system_name", default=None)
@click.option("--target", type=float, nargs=2, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--resolution", type=int, default=50)
@click.option("--seed", type=int, default=0)
def export(model_path, system_name, target, out_dir, resolution, seed):
    """Export plot-ready CSV grids from a saved model."""
    try:
        model = load_model(model_path)
        system = _load_system_for_model(model, system_name, list(target) if target else None)
        export_plotdata(model, system, out_dir, resolution=resolution, seed=seed)
    except (OSError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(f"exported plot data to {out_dir}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--matrix-file", type=click.Path(), default=None,
              help="JSON with A, B, Q, R (row-major) and optional gamma.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def dare(matrix_file, out_path):
    """Solve the discrete algebraic Riccati equation and print P, K."""
    try:
        if matrix_file:
            with open(matrix_file, encoding="utf-8") as fh:
                d = json.load(fh)
            problem = LqrProblem(A=d["A"], B=d["B"], Q=d["Q"], R=d["R"],
                                 gamma=d.get("gamma", 1.0))
        else:
            problem = benchmark_lqr_problem()
        P, K = solve_dare(problem)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_LEARNER)
    click.echo("P =")
    for row in P:
        click.echo("  " + "  ".join(f"{v: .12f}" for v in row))
    click.echo("K =")
    for row in K:
        click.echo("  " + "  ".join(f"{v: .12f}" for v in row))
    click.echo(f"DARE residual (inf-norm): {dare_residual(problem, P):.3e}")
    click.echo(f"closed-loop spectral radius: "
               f"{max(abs(np.linalg.eigvals(problem.A - problem.B @ K))):.6f}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump({"P": P.tolist(), "K": K.tolist()}, fh, indent=1)
            fh.write("\n")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
