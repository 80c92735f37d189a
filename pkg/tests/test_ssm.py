import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphem.ssm import (BlockSpec, StateSpaceModel, Trajectory, generate_block_transition,
                         project_stable, random_dense_stable, simulate)


def test_projection_scales_to_target():
    np.testing.assert_allclose(project_stable([[2.0]]), [[0.99]])


def test_projection_leaves_stable_matrix_alone():
    M = np.array([[0.5, 0.1], [0.0, 0.3]])
    np.testing.assert_array_equal(project_stable(M), M)


def test_dataset_a_block_pattern():
    A = generate_block_transition(BlockSpec((3, 3, 3)), 0)
    assert A.shape == (9, 9)
    assert np.count_nonzero(A) == 27
    mask = BlockSpec((3, 3, 3)).support()
    assert np.all(A[~mask] == 0.0)
    assert np.all(A[mask] != 0.0)


@given(sizes=st.lists(st.integers(1, 5), min_size=1, max_size=4), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_generated_matrix_is_stable_and_block_diagonal(sizes, seed):
    spec = BlockSpec(tuple(sizes))
    A = generate_block_transition(spec, seed)
    assert np.linalg.svd(A, compute_uv=False).max() < 1.0
    assert np.all(A[~spec.support()] == 0.0)


def test_generator_accepts_plain_sizes_and_is_seeded():
    a = generate_block_transition((2, 3), 11)
    b = generate_block_transition(BlockSpec((2, 3)), 11)
    np.testing.assert_array_equal(a, b)


def test_empty_block_list_rejected():
    with pytest.raises(ValueError):
        BlockSpec(())
    with pytest.raises(ValueError):
        BlockSpec((3, 0))


def test_dense_init_has_target_norm():
    A0 = random_dense_stable(6, 3, target=0.5)
    assert np.count_nonzero(A0) == 36
    assert np.linalg.norm(A0, 2) == pytest.approx(0.5)


def test_model_validates_shapes_and_covariances():
    eye = np.eye(2)
    with pytest.raises(ValueError):
        StateSpaceModel(A=np.eye(3), H=eye, Q=eye, R=eye, x0_mean=np.zeros(2), P0=eye)
    with pytest.raises(ValueError):
        StateSpaceModel(A=eye, H=eye, Q=np.array([[1.0, 0.5], [0.0, 1.0]]), R=eye,
                        x0_mean=np.zeros(2), P0=eye)
    with pytest.raises(ValueError):
        StateSpaceModel(A=eye, H=eye, Q=-eye, R=eye, x0_mean=np.zeros(2), P0=eye)


def test_model_is_read_only():
    m = StateSpaceModel.isotropic(np.eye(2) * 0.5, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        m.A[0, 0] = 3.0


def test_noiseless_fixed_point():
    u = np.array([1.5, -2.0])
    zero = np.zeros((2, 2))
    model = StateSpaceModel(A=np.eye(2), H=np.eye(2), Q=zero, R=zero, x0_mean=u, P0=zero)
    traj = simulate(model, 20, 0)
    np.testing.assert_array_equal(traj.observations, np.tile(u, (20, 1)))


def test_state_covariance_matches_q_for_white_dynamics():
    Q = np.array([[1.0, 0.3], [0.3, 0.5]])
    model = StateSpaceModel(A=np.zeros((2, 2)), H=np.eye(2), Q=Q, R=np.eye(2) * 0.1,
                            x0_mean=np.zeros(2), P0=np.eye(2))
    K = 100_000
    traj = simulate(model, K, 5)
    emp = traj.states.T @ traj.states / K
    # 5-sigma bound on each entry of the sample covariance
    sd = np.sqrt((Q**2 + np.outer(np.diag(Q), np.diag(Q))) / K)
    assert np.all(np.abs(emp - Q) <= 5 * sd)
    # and the coarser per-entry 5% statement
    assert np.all(np.abs(emp - Q) <= 0.05 * np.maximum(np.abs(Q), 1.0))


def test_simulation_is_deterministic():
    model = BlockSpec((2, 2)).model(generate_block_transition((2, 2), 1))
    a = simulate(model, 50, 123)
    b = simulate(model, 50, 123)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.observations, b.observations)
    c = simulate(model, 50, 124)
    assert not np.array_equal(a.observations, c.observations)


def test_simulate_rejects_bad_length():
    model = BlockSpec((2,)).model(np.eye(2) * 0.5)
    with pytest.raises(ValueError):
        simulate(model, 0, 1)


def test_trajectory_lengths_must_match():
    with pytest.raises(ValueError):
        Trajectory(states=np.zeros((3, 2)), observations=np.zeros((4, 2)))


def test_tiny_prior_variance_is_sampled():
    model = BlockSpec((3,), (0.1, 0.1, 1e-4)).model(np.eye(3) * 0.5)
    traj = simulate(model, 5, 0)
    assert np.isfinite(traj.observations).all()
