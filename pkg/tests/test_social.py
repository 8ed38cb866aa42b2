import numpy as np
import pytest

from reverb import transforms
from reverb.errors import ConfigError
from reverb.nn import tensor as T
from reverb.nn.layers import ParameterStore
from reverb.social import (
    SocialEncoder,
    assign_partition,
    assign_partitions,
    bearing,
    flatten_rows,
)


def make_encoder(kind="haar", t_h=4, m=2, d=6, n_theta=8, per_step=False, seed=3):
    store = ParameterStore(seed)
    enc = SocialEncoder(store, "soc", kind, t_h, m, d, n_theta, per_step=per_step)
    return enc, store


def straight_walk(start, velocity, t_h, dt=0.4):
    start = np.asarray(start, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    steps = np.arange(t_h)[:, None] * dt
    return start + steps * velocity


class TestPartitionAssignment:
    def test_due_plus_x_is_partition_zero(self):
        ego = straight_walk([0.0, 0.0], [1.0, 0.0], 4)
        nbr = ego + np.array([2.0, 0.0])
        assert assign_partition(ego, nbr, 8) == 0

    def test_due_plus_y_is_partition_two(self):
        ego = np.zeros((4, 2))
        nbr = np.zeros((4, 2))
        nbr[:, 1] = 3.0
        assert assign_partition(ego, nbr, 8) == 2

    def test_sector_boundaries(self):
        # pi/4 sits exactly on the edge between sectors 0 and 1.
        assert assign_partition([0.0, 0.0], [1.0, 1.0], 8) == 1
        # Just under the edge stays in sector 0.
        assert assign_partition([0.0, 0.0], [1.0, 0.999], 8) == 0

    def test_negative_angles_wrap(self):
        assert assign_partition([0.0, 0.0], [0.0, -1.0], 8) == 6
        assert assign_partition([0.0, 0.0], [-1.0, -1e-9], 8) == 4

    def test_only_final_frame_matters(self):
        ego = np.zeros((4, 2))
        nbr = np.array([[5.0, -9.0], [0.0, -3.0], [1.0, 1.0], [0.0, 2.0]])
        assert assign_partition(ego, nbr, 8) == 2

    def test_coincident_neighbor_degenerate(self):
        idx, degenerate = assign_partitions(
            np.zeros((3, 2)),
            np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]),
            8,
        )
        assert idx.tolist() == [0, 0, 0]
        assert degenerate.tolist() == [True, False, True]

    def test_every_index_in_range(self):
        rng = np.random.default_rng(0)
        ego = rng.normal(size=(500, 2))
        nbr = rng.normal(size=(500, 2))
        for n_theta in (1, 3, 8):
            idx, _ = assign_partitions(ego, nbr, n_theta)
            assert idx.min() >= 0 and idx.max() < n_theta
            # Cross-check against the scalar path.
            for i in (0, 17, 499):
                assert idx[i] == assign_partition(ego[i], nbr[i], n_theta)

    def test_bearing_matches_atan2(self):
        assert bearing([1.0, 1.0], [1.0, 2.0]) == pytest.approx(np.pi / 2)
        assert bearing([0.0, 0.0], [-1.0, 0.0]) == pytest.approx(np.pi)

    def test_zero_partitions_rejected(self):
        with pytest.raises(ConfigError):
            assign_partition([0.0, 0.0], [1.0, 0.0], 0)


class TestFlatten:
    def test_bucket_major_order(self):
        t_h, n, d = 3, 4, 2
        vals = np.arange(t_h * n * d, dtype=float).reshape(t_h, n, d)
        flat = flatten_rows(T.Tensor(vals)).data
        for bucket in range(n):
            for t in range(t_h):
                np.testing.assert_array_equal(flat[bucket * t_h + t], vals[t, bucket])

    def test_flatten_gradient_routes_back(self):
        vals = T.Tensor(np.ones((2, 3, 2)), requires_grad=True)
        out = flatten_rows(vals)
        T.backward(T.sum_(out * out))
        np.testing.assert_allclose(vals.grad, 2.0 * np.ones((2, 3, 2)))


class TestOwnSpectrum:
    def test_translated_last_point_is_origin(self):
        enc, _ = make_encoder()
        rng = np.random.default_rng(1)
        seq = rng.normal(size=(4, 2)) + 7.0
        spec = enc.own_spectrum(seq)
        back = transforms.inverse_values(spec, "haar")
        np.testing.assert_allclose(back[-1], [0.0, 0.0], atol=1e-12)

    def test_translation_invariance(self):
        enc, _ = make_encoder()
        rng = np.random.default_rng(2)
        seq = rng.normal(size=(4, 2))
        shifted = seq + np.array([13.0, -4.0])
        np.testing.assert_allclose(
            enc.embed_agent(seq).data, enc.embed_agent(shifted).data, atol=1e-12
        )

    def test_identical_agents_identical_embeddings(self):
        enc, _ = make_encoder()
        seq = straight_walk([1.0, 2.0], [0.5, -0.2], 4)
        a = enc.embed_agent(seq).data
        b = enc.embed_agent(seq.copy()).data
        np.testing.assert_array_equal(a, b)


class TestPairFeature:
    def test_product_symmetry(self):
        enc, _ = make_encoder()
        rng = np.random.default_rng(3)
        e1 = T.Tensor(rng.normal(size=(2, 6)))
        e2 = T.Tensor(rng.normal(size=(2, 6)))
        np.testing.assert_array_equal(
            enc.pair_feature(e1, e2).data, enc.pair_feature(e2, e1).data
        )

    def test_elementwise_product_against_brute_force(self):
        enc, _ = make_encoder()
        rng = np.random.default_rng(4)
        a = rng.normal(size=(2, 6))
        b = rng.normal(size=(2, 6))
        got = enc.pair_feature(T.Tensor(a), T.Tensor(b)).data
        want = enc.embed_pair(T.Tensor(a * b)).data
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_zero_neighbor_gives_bias_only(self):
        enc, _ = make_encoder()
        e_ego = T.Tensor(np.random.default_rng(5).normal(size=(2, 6)))
        zero = T.Tensor(np.zeros((2, 6)))
        got = enc.pair_feature(e_ego, zero).data
        want = enc.embed_pair(zero).data
        np.testing.assert_array_equal(got, want)
        assert got.shape == (2, 6)


class TestRepresent:
    def test_no_neighbors_all_zero(self):
        enc, _ = make_encoder()
        ego = straight_walk([0.0, 0.0], [1.0, 0.0], 4)
        out = enc.represent(ego, []).data
        assert out.shape == (2, 8, 6)
        np.testing.assert_array_equal(out, np.zeros_like(out))

    def test_single_neighbor_touches_one_bucket(self):
        enc, _ = make_encoder()
        ego = straight_walk([0.0, 0.0], [1.0, 0.0], 4)
        nbr = ego + np.array([0.0, 2.0])  # due +y -> bucket 2
        out = enc.represent(ego, [nbr]).data
        occupied = out[:, 2, :]
        assert np.abs(occupied).max() > 0
        for bucket in range(8):
            if bucket != 2:
                np.testing.assert_array_equal(out[:, bucket, :], 0.0)

    def test_same_bucket_pair_averages(self):
        enc, _ = make_encoder()
        ego = straight_walk([0.0, 0.0], [1.0, 0.0], 4)
        n1 = ego + np.array([0.0, 2.0])
        n2 = ego * 0.5 + np.array([0.3, 3.0])
        assert assign_partition(ego, n1, 8) == assign_partition(ego, n2, 8) == 2
        both = enc.represent(ego, [n1, n2]).data[:, 2, :]
        one = enc.represent(ego, [n1]).data[:, 2, :]
        two = enc.represent(ego, [n2]).data[:, 2, :]
        np.testing.assert_allclose(both, 0.5 * (one + two), atol=1e-12)

    def test_permutation_invariance(self):
        enc, _ = make_encoder()
        rng = np.random.default_rng(6)
        ego = straight_walk([0.0, 0.0], [0.7, 0.1], 4)
        nbrs = [ego + rng.normal(scale=3.0, size=2) for _ in range(5)]
        fwd = enc.represent(ego, nbrs).data
        rev = enc.represent(ego, nbrs[::-1]).data
        np.testing.assert_allclose(fwd, rev, atol=1e-12)

    def test_replay_is_deterministic(self):
        ego = straight_walk([0.0, 1.0], [0.2, 0.3], 4)
        nbr = ego + np.array([1.0, 1.0])
        a = make_encoder(seed=11)[0].represent(ego, [nbr]).data
        b = make_encoder(seed=11)[0].represent(ego, [nbr]).data
        np.testing.assert_array_equal(a, b)

    def test_gradients_reach_both_embeddings(self):
        enc, store = make_encoder()
        ego = straight_walk([0.0, 0.0], [1.0, 0.0], 4)
        nbr = ego + np.array([2.0, 1.0])
        out = enc.represent(ego, [nbr])
        T.backward(T.sum_(out * out))
        for name, param in store.items():
            assert param.grad is not None, name


class TestPerStep:
    def test_dft_rejected(self):
        with pytest.raises(ConfigError):
            make_encoder(kind="dft", per_step=True)

    def test_row_partitions_follow_motion(self):
        enc, _ = make_encoder(kind="none", t_h=4, per_step=True, n_theta=8)
        ego = np.zeros((4, 2))
        nbr = np.array([[0.0, 2.0], [0.0, 2.0], [0.0, -2.0], [0.0, -2.0]])
        rows = enc.row_partitions(ego, nbr)
        assert rows.tolist() == [2, 2, 6, 6]

    def test_static_repeats_final_assignment(self):
        enc, _ = make_encoder(kind="none", t_h=4, per_step=False, n_theta=8)
        ego = np.zeros((4, 2))
        nbr = np.array([[0.0, 2.0], [0.0, 2.0], [0.0, -2.0], [0.0, -2.0]])
        assert enc.row_partitions(ego, nbr).tolist() == [6, 6, 6, 6]

    def test_paired_kind_anchors_on_odd_frames(self):
        enc, _ = make_encoder(kind="haar", t_h=4, per_step=True, n_theta=8)
        ego = np.zeros((4, 2))
        # Rows cover frames (0,1) and (2,3); anchors are frames 1 and 3.
        nbr = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 0.0], [0.0, -2.0]])
        assert enc.row_partitions(ego, nbr).tolist() == [2, 6]
