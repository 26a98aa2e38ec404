import numpy as np
import pytest

from clfirl.errors import IngestError
from clfirl.grids import build_grid
from clfirl.kernels import RkhsFunction, SquaredExponentialKernel
from clfirl.model_io import LearnedModel, load_model, save_model
from clfirl.systems import Trajectory, builtin_nonlinear_system
from clfirl.trajectory_io import ingest_trajectories, write_trajectories


def sample_trajectories(rng, n=3, steps=4, with_actions=True):
    trajs = []
    for i in range(n):
        states = rng.uniform(-4, 4, size=(steps + 1, 2))
        actions = rng.standard_normal((steps, 2)) if with_actions else None
        trajs.append(Trajectory(states=states, actions=actions, traj_id=f"tr{i}"))
    return trajs


def test_round_trip_full_precision(tmp_path, lqr_system):
    rng = np.random.default_rng(60)
    trajs = sample_trajectories(rng)
    path = tmp_path / "demos.csv"
    write_trajectories(path, trajs)
    back = ingest_trajectories(path, lqr_system)
    assert len(back) == 3
    for a, b in zip(trajs, back):
        assert a.traj_id == b.traj_id
        # repr round-trips doubles exactly
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.actions, b.actions)


def test_round_trip_without_actions(tmp_path, lqr_system):
    rng = np.random.default_rng(61)
    trajs = sample_trajectories(rng, with_actions=False)
    path = tmp_path / "demos.csv"
    write_trajectories(path, trajs)
    back = ingest_trajectories(path, lqr_system)
    assert back[0].actions is None
    assert np.array_equal(back[1].states, trajs[1].states)


def test_ingest_counts_transition_pairs(tmp_path, nonlinear_system):
    rng = np.random.default_rng(62)
    trajs = []
    for i in range(4):
        states = rng.uniform(0, 5, size=(12, 2))
        trajs.append(Trajectory(states=states, traj_id=f"human{i}"))
    path = tmp_path / "demos.csv"
    write_trajectories(path, trajs)
    back = ingest_trajectories(path, nonlinear_system)
    assert len(back) == 4
    assert sum(len(t) - 1 for t in back) == 44


def test_ingest_empty_file(tmp_path, lqr_system):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(IngestError, match="empty"):
        ingest_trajectories(path, lqr_system)


def test_ingest_header_only(tmp_path, lqr_system):
    path = tmp_path / "header.csv"
    path.write_text("traj_id,t,x1,x2\n")
    with pytest.raises(IngestError, match="no data rows"):
        ingest_trajectories(path, lqr_system)


def test_ingest_out_of_bounds_names_row(tmp_path, lqr_system):
    path = tmp_path / "oob.csv"
    path.write_text("traj_id,t,x1,x2\na,0,1.0,1.0\na,1,9.0,0.0\n")
    with pytest.raises(IngestError, match=":3"):
        ingest_trajectories(path, lqr_system)


def test_ingest_duplicate_named(tmp_path, lqr_system):
    path = tmp_path / "dup.csv"
    path.write_text("traj_id,t,x1,x2\na,0,1.0,1.0\na,0,1.5,1.0\n")
    with pytest.raises(IngestError, match="duplicate"):
        ingest_trajectories(path, lqr_system)


def test_ingest_non_monotone_t(tmp_path, lqr_system):
    path = tmp_path / "mono.csv"
    path.write_text("traj_id,t,x1,x2\na,0,1.0,1.0\na,2,1.5,1.0\na,1,1.2,1.0\n")
    with pytest.raises(IngestError, match="non-monotone"):
        ingest_trajectories(path, lqr_system)


def test_ingest_missing_file(tmp_path, lqr_system):
    with pytest.raises(IngestError, match="cannot open"):
        ingest_trajectories(tmp_path / "nope.csv", lqr_system)


def test_ingest_bad_header(tmp_path, lqr_system):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(IngestError, match="bad header"):
        ingest_trajectories(path, lqr_system)


def test_ingest_groups_interleaved_trajectories(tmp_path, lqr_system):
    path = tmp_path / "interleaved.csv"
    path.write_text("traj_id,t,x1,x2\n"
                    "a,0,1.0,1.0\nb,0,2.0,2.0\na,1,1.1,0.9\nb,1,2.1,1.8\n")
    back = ingest_trajectories(path, lqr_system)
    assert [t.traj_id for t in back] == ["a", "b"]
    assert len(back[0]) == 2


# ----------------------------------------------------------- model JSON

def make_model():
    system = builtin_nonlinear_system()
    grid = build_grid(list(zip(system.lower, system.upper)), 4, system.target)
    grid.tightening = 0.07
    kernel = SquaredExponentialKernel(lengthscale=1.9, signal_variance=1.3)
    rng = np.random.default_rng(63)
    data_states = rng.uniform(0, 5, size=(6, 2))
    centers = np.concatenate([data_states, grid.points])
    V = RkhsFunction(centers, rng.standard_normal(len(centers)), kernel)
    return LearnedModel(V=V, beta=0.2, grid=grid, n_data_states=6,
                        config_echo={"beta": 0.2, "tolerance": 1e-6},
                        training_meta={"loss_trace": [1.0, 0.5],
                                       "violation_trace": [0.1, 0.0],
                                       "mc_samples_used": 1,
                                       "constraint_noise_seed": 42})


def test_model_json_round_trip(tmp_path):
    model = make_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.V.weights, model.V.weights)
    assert np.array_equal(back.V.centers, model.V.centers)
    assert back.grid.tightening == model.grid.tightening
    assert back.n_data_states == 6
    assert back.training_meta["loss_trace"] == [1.0, 0.5]
    # byte-identical re-serialization
    path2 = tmp_path / "model2.json"
    save_model(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_model_center_invariant():
    model = make_model()
    with pytest.raises(ValueError, match="centers"):
        LearnedModel(V=model.V, beta=0.2, grid=model.grid, n_data_states=5)


def test_model_grid_center_order_checked():
    model = make_model()
    shuffled = np.concatenate([model.V.centers[:6], model.V.centers[6:][::-1]])
    V_bad = RkhsFunction(shuffled, model.V.weights, model.V.kernel)
    with pytest.raises(ValueError, match="grid points"):
        LearnedModel(V=V_bad, beta=0.2, grid=model.grid, n_data_states=6)
