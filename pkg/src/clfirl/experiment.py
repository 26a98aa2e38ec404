"""End-to-end experiment pipeline: data -> learn -> certify -> export.

Artifacts land in the output directory: model.json, cert_report.json,
plot-ready CSV grids (surface, policy, decrease, ground truth for the linear
preset), simulated rollouts, the training-data echo, and a MANIFEST noting
which stages completed.  All randomness derives from the spec seed, so two
runs with the same spec produce byte-identical artifacts apart from the
MANIFEST timestamp line.
"""

import datetime
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibilityError, IngestError, LineSearchError
from .grids import build_grid
from .kernels import SquaredExponentialKernel, default_lengthscale
from .learner import DecreaseEvaluator, LearnerConfig, constraint_noise, derived_seed, solve
from .lqr import QuadraticValue, benchmark_lqr_problem, solve_dare
from .model_io import save_model
from .presets import make_lqr_demos, make_synthetic_demos
from .systems import simulate
from .trajectory_io import ingest_trajectories, write_trajectories
from .verifier import certify

EXIT_OK = 0
EXIT_LEARNER = 1
EXIT_IO = 2
EXIT_CERT = 3


@dataclass
class ExperimentResult:
    exit_code: int
    out_dir: str
    stages: list = field(default_factory=list)
    model: object = None
    report: object = None
    error: str = None


def _export_grid_csv(path, header, columns):
    rows = np.column_stack(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _lattice(system, resolution):
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(system.lower, system.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def export_plotdata(model, system, out_dir, resolution=50, spec=None, seed=0):
    """Write the plot-ready CSV artifacts for a trained model."""
    os.makedirs(out_dir, exist_ok=True)
    pts = _lattice(system, resolution)
    names = [f"x{i+1}" for i in range(system.state_dim)]

    _export_grid_csv(os.path.join(out_dir, "surface.csv"),
                     names + ["V"], [*pts.T, model.V.eval_batch(pts)])

    policy = model.policy(system)
    actions = np.stack([policy.action(x) for x in pts])
    _export_grid_csv(os.path.join(out_dir, "policy.csv"),
                     names + [f"u{i+1}" for i in range(system.input_dim)],
                     [*pts.T, *actions.T])

    config = LearnerConfig(**{**model.config_echo,
                              "decrease_bounds": None}) if model.config_echo else LearnerConfig()
    pm = config.perturbation(system)
    samples = int(model.training_meta.get("mc_samples_used", 1))
    noise, _ = constraint_noise(system, pm, pts, samples, derived_seed(seed, "export-decrease"))
    ev = DecreaseEvaluator(system, pts, model.V.kernel, model.V.centers, model.beta, noise)
    _export_grid_csv(os.path.join(out_dir, "decrease.csv"),
                     names + ["dV"], [*pts.T, ev.values(model.V.weights)])

    if (spec is None and system.name == "lqr") or (spec is not None and spec.system_name == "lqr"):
        P, _ = solve_dare(benchmark_lqr_problem())
        vstar = QuadraticValue(P)
        _export_grid_csv(os.path.join(out_dir, "ground_truth.csv"),
                         names + ["Vstar"], [*pts.T, vstar.eval_batch(pts)])

    n_rollouts = spec.n_export_rollouts if spec is not None else 8
    horizon = spec.rollout_horizon if spec is not None else 500
    rng = np.random.default_rng(np.random.SeedSequence([derived_seed(seed, "export-rollouts")]))
    starts = system.sample_states(n_rollouts, rng)
    rollouts = [simulate(system, policy, pm, x0, horizon,
                         traj_id=f"rollout-{i:02d}", stream_index=i)
                for i, x0 in enumerate(starts)]
    write_trajectories(os.path.join(out_dir, "rollouts.csv"), rollouts)
    return out_dir


def _write_manifest(out_dir, spec_name, seed, stages, status):
    with open(os.path.join(out_dir, "MANIFEST.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"experiment: {spec_name}\n")
        fh.write(f"seed: {seed}\n")
        for name, outcome in stages:
            fh.write(f"stage: {name} {outcome}\n")
        fh.write(f"status: {status}\n")
        fh.write(f"timestamp: {datetime.datetime.now().isoformat()}\n")


def run_experiment(spec, out_dir):
    """Execute an ExperimentSpec; artifacts survive partial failures."""
    stages = []
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        return ExperimentResult(EXIT_IO, out_dir, stages, error=f"output dir: {exc}")

    def fail(code, err):
        _write_manifest(out_dir, spec.name, spec.seed, stages, f"failed: {err}")
        return ExperimentResult(code, out_dir, stages, error=str(err))

    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

    system = spec.build_system()

    # ---- data stage -------------------------------------------------------
    try:
        if spec.data_file:
            if not os.path.exists(spec.data_file):
                raise IngestError(f"data file not found: {spec.data_file}")
            demos = ingest_trajectories(spec.data_file, system)
        elif spec.generator.get("kind") == "lqr-optimal":
            demos = make_lqr_demos(system, spec.generator, derived_seed(spec.seed, "demos"))
        elif spec.generator.get("kind") == "potential-field":
            demos = make_synthetic_demos(system, spec.generator, derived_seed(spec.seed, "demos"))
        else:
            raise ValueError(f"no data source: generator {spec.generator!r}")
        write_trajectories(os.path.join(out_dir, "training_data.csv"), demos)
        stages.append(("data", f"ok ({len(demos)} trajectories)"))
    except (IngestError, ValueError, RuntimeError, OSError) as exc:
        stages.append(("data", "failed"))
        return fail(EXIT_IO, exc)

    # ---- learn stage ------------------------------------------------------
    try:
        grid = build_grid(list(zip(system.lower, system.upper)),
                          spec.grid_resolution, system.target)
        lengthscale = spec.lengthscale
        if lengthscale is None:
            lengthscale = default_lengthscale(system.lower, system.upper)
        kernel = SquaredExponentialKernel(lengthscale=lengthscale,
                                          signal_variance=spec.signal_variance)
        config = LearnerConfig(rng_seed=derived_seed(spec.seed, "learner"),
                               **spec.learner)
        model = solve(demos, system, grid, config, kernel)
        model.training_meta["system_name"] = spec.system_name
        model.training_meta["system_file"] = spec.system_file
        model.training_meta["system_target"] = [float(v) for v in system.target]
        model.training_meta["experiment"] = spec.name
        stages.append(("learn", f"ok (loss {model.training_meta['loss_trace'][-1]:.6g})"))
    except (InfeasibilityError, LineSearchError) as exc:
        stages.append(("learn", "failed"))
        return fail(EXIT_LEARNER, exc)
    except ValueError as exc:
        stages.append(("learn", "failed"))
        return fail(EXIT_IO, exc)

    # ---- certify stage ----------------------------------------------------
    try:
        pm = config.perturbation(system)
        report = certify(model, system, pm, refinement=spec.dense_refinement,
                         n_rollouts=spec.n_rollouts, horizon=spec.rollout_horizon,
                         seed=derived_seed(spec.seed, "certify"))
    except (ValueError, RuntimeError) as exc:
        stages.append(("certify", "failed"))
        return fail(EXIT_LEARNER, exc)
    model.certification = report
    stages.append(("certify", "ok (passed)" if report.passed else "ok (FAILED audits)"))

    # ---- export stage -----------------------------------------------------
    try:
        save_model(model, os.path.join(out_dir, "model.json"))
        with open(os.path.join(out_dir, "cert_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        export_plotdata(model, system, out_dir, resolution=spec.export_resolution,
                        spec=spec, seed=derived_seed(spec.seed, "export"))
        stages.append(("export", "ok"))
    except OSError as exc:
        stages.append(("export", "failed"))
        return fail(EXIT_IO, exc)

    status = "success" if report.passed else "certification failed"
    _write_manifest(out_dir, spec.name, spec.seed, stages, status)
    code = EXIT_OK if report.passed else EXIT_CERT
    return ExperimentResult(code, out_dir, stages, model=model, report=report)
