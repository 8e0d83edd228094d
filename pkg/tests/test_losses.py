import numpy as np
import pytest

from ega.errors import ConfigError
from ega.losses import (
    TripletBatch,
    active_ratio,
    supcon_infonce_loss,
    triplet_loss,
    triplet_row_grads,
)
from helpers import fd_arrays_gradient, rel_err


def one_triple_embeddings():
    # dap = 1, dan = 0.6, viol = 1 - 0.6 + 0.2 = 0.6
    return np.array([[0.0, 0.0], [0.0, 1.0], [0.6, 0.0]])


def test_single_active_triple_by_hand():
    z = one_triple_embeddings()
    out = triplet_loss(z, TripletBatch([0], [1], [2], margin=0.2))
    assert out.value == pytest.approx(0.6, abs=1e-12)
    assert out.active_count == 1
    np.testing.assert_allclose(out.grads[0], [1.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(out.grads[1], [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(out.grads[2], [-1.0, 0.0], atol=1e-12)


def test_one_active_of_four_divides_by_batch_size():
    z = np.vstack([one_triple_embeddings(), [[0.0, 5.0]]])
    # triples 1..3 reuse the far point as negative: dap=1, dan>4, inactive
    batch = TripletBatch([0, 0, 0, 0], [1, 1, 1, 1], [2, 3, 3, 3], margin=0.2)
    out = triplet_loss(z, batch)
    assert out.value == pytest.approx(0.15, abs=1e-12)
    assert out.active_count == 1
    assert active_ratio(batch) == 0.25


def test_hinge_boundary_is_inactive():
    # margin chosen so viol is exactly 0.0 in float64
    z = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0]])
    batch = TripletBatch([0], [1], [2], margin=0.25)
    out = triplet_loss(z, batch)
    assert out.value == 0.0
    assert out.active_count == 0
    assert not batch.active_mask[0]
    assert np.all(out.grads == 0.0)


def test_inactive_triples_are_bitwise_invisible():
    for seed in range(5):
        r = np.random.default_rng(seed)
        z = r.normal(size=(64, 16)).astype(np.float32)
        a = r.integers(0, 64, size=200)
        p = r.integers(0, 64, size=200)
        n = r.integers(0, 64, size=200)
        full = TripletBatch(a, p, n, margin=0.2)
        out_full = triplet_loss(z, full)
        keep = full.active_mask
        assert 0 < keep.sum() < 200, "seed gives a mixed batch"
        reduced = TripletBatch(a[keep], p[keep], n[keep], margin=0.2)
        out_red = triplet_loss(z, reduced, denom=len(full))
        assert out_red.value == out_full.value
        np.testing.assert_array_equal(out_red.grads, out_full.grads)
        assert out_red.active_count == out_full.active_count


def test_zero_distance_uses_zero_subgradient():
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.9, 0.0]])
    batch = TripletBatch([0], [1], [2], margin=0.2)
    out = triplet_loss(z, batch)
    assert out.value == pytest.approx(0.1, abs=1e-12)
    # dap = 0: the anchor-positive direction contributes nothing
    np.testing.assert_array_equal(out.grads[1], [0.0, 0.0])
    np.testing.assert_allclose(out.grads[0], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(out.grads[2], [1.0, 0.0], atol=1e-12)


def test_row_grads_match_full_gradient():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(20, 6))
    a = rng.integers(0, 20, size=40)
    p = rng.integers(0, 20, size=40)
    n = rng.integers(0, 20, size=40)
    batch = TripletBatch(a, p, n, margin=0.2)
    out = triplet_loss(z, batch)
    rows, ups = triplet_row_grads(z, batch)
    assert rows.shape == (out.active_count, 3)
    assert ups.shape == (out.active_count, 3, 6)
    rebuilt = np.zeros_like(z)
    for g in range(rows.shape[0]):
        for j in range(3):
            rebuilt[rows[g, j]] += ups[g, j] / len(batch)
    assert rel_err(rebuilt, out.grads) < 1e-12


def test_row_grads_requires_evaluated_batch():
    batch = TripletBatch([0], [1], [2])
    with pytest.raises(ValueError):
        triplet_row_grads(np.eye(3), batch)
    with pytest.raises(ValueError):
        active_ratio(batch)


def test_triplet_grads_match_fd():
    rng = np.random.default_rng(11)
    z = rng.normal(size=(12, 8))
    a = rng.integers(0, 12, size=30)
    p = rng.integers(0, 12, size=30)
    n = rng.integers(0, 12, size=30)
    batch = TripletBatch(a, p, n, margin=0.2)
    out = triplet_loss(z, batch)
    # precondition: no triple sits near the kink, so FD sees a smooth loss
    dap = np.sqrt(((z[a] - z[p]) ** 2).sum(axis=1))
    dan = np.sqrt(((z[a] - z[n]) ** 2).sum(axis=1))
    assert np.abs(dap - dan + 0.2).min() > 1e-3

    (fd,) = fd_arrays_gradient(lambda: triplet_loss(z, batch).value, [z])
    assert rel_err(out.grads, fd) < 1e-4


def test_triplet_validation():
    with pytest.raises(ConfigError):
        TripletBatch([0], [1, 2], [2])
    with pytest.raises(ConfigError):
        TripletBatch([0], [1], [2], margin=0.0)
    with pytest.raises(ConfigError):
        triplet_loss(np.eye(3), TripletBatch([], [], []))


def test_infonce_uniform_candidates_give_log2():
    z = np.eye(3)
    for tau in (0.07, 1.0):
        out = supcon_infonce_loss(z, np.array([0, 0, 1]), temperature=tau)
        assert out.value == pytest.approx(np.log(2.0), abs=1e-7)
        assert out.active_count == 2  # the lone label-1 row is skipped


def test_infonce_closed_form_two_points():
    # anchors 0, 1 each see one positive at sim 1 and one negative at sim 0
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    out = supcon_infonce_loss(z, np.array([0, 0, 1]), temperature=1.0)
    assert out.value == pytest.approx(np.log(1.0 + np.e) - 1.0, abs=1e-12)


def test_infonce_grads_match_fd():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(6, 8))
    labels = np.array([0, 0, 1, 1, 2, 2])
    out = supcon_infonce_loss(z, labels, temperature=0.07)
    (fd,) = fd_arrays_gradient(lambda: supcon_infonce_loss(z, labels, temperature=0.07).value, [z])
    assert rel_err(out.grads, fd) < 1e-4


def test_infonce_skips_anchors_without_positives():
    rng = np.random.default_rng(6)
    z = rng.normal(size=(5, 4))
    labels = np.array([0, 0, 1, 1, 2])
    out = supcon_infonce_loss(z, labels)
    assert out.active_count == 4
    # the orphan row still receives gradient as a negative for others
    assert np.abs(out.grads[4]).max() > 0


def test_infonce_validation():
    z = np.eye(3)
    with pytest.raises(ConfigError, match="temperature"):
        supcon_infonce_loss(z, np.array([0, 0, 1]), temperature=0.0)
    with pytest.raises(ConfigError, match="positive"):
        supcon_infonce_loss(z, np.array([0, 1, 2]))
    with pytest.raises(ConfigError):
        supcon_infonce_loss(z[:1], np.array([0]))
    with pytest.raises(ConfigError):
        supcon_infonce_loss(z, np.array([0, 1]))
