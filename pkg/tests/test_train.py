import math

import numpy as np
import numpy.testing as npt
import pytest

from ernn.cells import forward_sequence, init_params
from ernn.data import SequenceDataset, gen_random_walks, split
from ernn.train import (
    AdamState,
    DivergenceError,
    GradientSet,
    TrainConfig,
    adam_step,
    backward,
    batch_softmax_cross_entropy,
    evaluate,
    finite_diff_gradcheck,
    loss_and_grad,
    softmax_cross_entropy,
    train,
)


def test_softmax_cross_entropy_examples():
    loss, g = softmax_cross_entropy([0.0, 0.0], 0)
    assert loss == pytest.approx(math.log(2), rel=1e-15)
    npt.assert_allclose(g, [-0.5, 0.5])
    loss, _ = softmax_cross_entropy([1000.0, 0.0], 0)
    assert loss == pytest.approx(0.0, abs=1e-300)
    loss, _ = softmax_cross_entropy([0.0, 1000.0], 0)
    assert loss == pytest.approx(1000.0)
    losses, G = batch_softmax_cross_entropy(np.array([[0.0, 0.0], [2.0, -1.0]]), np.array([0, 1]))
    npt.assert_allclose(G.sum(axis=1), 0.0, atol=1e-15)


def test_zero_dlogits_give_zero_gradients():
    p = init_params("ernn_exemplar", 3, 2, 4, 2, seed=1)
    _, _, tape = forward_sequence(p, np.ones((4, 2)))
    g = backward(p, tape, np.zeros(2))
    for _, arr in g.items():
        npt.assert_array_equal(arr, 0.0)


def random_instance(rng, kind, activation):
    n, d, T = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(2, 7))
    K = 1 if kind in ("vanilla_rnn", "fastrnn") else int(rng.integers(1, 4))
    p = init_params(kind, n, d, T, K, C=3, activation=activation, seed=int(rng.integers(2**31)))
    p = p.replace(
        eta=rng.uniform(0.05, 0.9, p.eta.shape),
        b=rng.normal(0, 0.3, n),
        cb=rng.normal(0, 0.3, 3),
    )
    return p, (rng.standard_normal((T, d)), int(rng.integers(3)))


def far_from_kinks(p, x, margin=1e-3):
    _, _, tape = forward_sequence(p, x)
    return bool(np.min(np.abs(tape.pre)) >= margin)


@pytest.mark.parametrize("kind", ["vanilla_rnn", "ernn_toy", "ernn_exemplar", "fastrnn"])
def test_gradcheck_tanh(kind):
    rng = np.random.default_rng(100)
    for _ in range(4):
        p, sample = random_instance(rng, kind, "tanh")
        assert finite_diff_gradcheck(p, sample) <= 1e-5


@pytest.mark.parametrize("kind", ["vanilla_rnn", "ernn_toy", "ernn_exemplar", "fastrnn"])
def test_gradcheck_relu_away_from_kinks(kind):
    rng = np.random.default_rng(200)
    checked = 0
    while checked < 4:
        p, sample = random_instance(rng, kind, "relu")
        if not far_from_kinks(p, sample[0]):
            continue
        assert finite_diff_gradcheck(p, sample) <= 1e-4
        checked += 1


def test_gradcheck_step_sizes_agree():
    rng = np.random.default_rng(3)
    p, sample = random_instance(rng, "ernn_toy", "tanh")
    assert finite_diff_gradcheck(p, sample, eps=1e-5) <= 1e-5
    assert finite_diff_gradcheck(p, sample, eps=1e-6) <= 1e-5
    with pytest.raises(ValueError):
        finite_diff_gradcheck(p, sample, eps=1e-2)


def test_batch_gradient_is_mean_of_sample_gradients():
    p = init_params("ernn_exemplar", 4, 2, 5, 2, seed=4, activation="tanh")
    rng = np.random.default_rng(0)
    X, y = rng.standard_normal((6, 5, 2)), rng.integers(0, 2, 6)
    loss, g = loss_and_grad(p, X, y)
    parts = [loss_and_grad(p, X[i : i + 1], y[i : i + 1]) for i in range(6)]
    assert loss == pytest.approx(np.mean([l for l, _ in parts]), rel=1e-12)
    for name, arr in g.items():
        npt.assert_allclose(arr, np.mean([getattr(pg, name) for _, pg in parts], axis=0), rtol=1e-12, atol=1e-15)


def test_adam_zero_gradient_and_first_step():
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    state = AdamState.zeros_like(p)
    q = adam_step(p, GradientSet.zeros_like(p), state, lr=1e-2)
    for name, arr in p.tensors().items():
        npt.assert_array_equal(getattr(q, name), arr)

    g = GradientSet.zeros_like(p)
    g.V[:] = 3.0
    g.b[:] = -1e-3
    q = adam_step(p, g, AdamState.zeros_like(p), lr=1e-2)
    npt.assert_allclose(q.V - p.V, -1e-2, rtol=1e-6)
    npt.assert_allclose(q.b - p.b, 1e-2, rtol=1e-4)


def test_adam_rejects_nonfinite():
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    g = GradientSet.zeros_like(p)
    g.W[0, 0] = np.nan
    with pytest.raises(DivergenceError):
        adam_step(p, g, AdamState.zeros_like(p), lr=1e-2)


def test_fastrnn_training_keeps_u_zero():
    ds = gen_random_walks(20, 6, seed=0)
    p = init_params("fastrnn", 4, 2, 6, 1, seed=0)
    res = train(p, ds, TrainConfig(epochs=2, batch_size=8, hidden_dim=4))
    npt.assert_array_equal(res.params.U, 0.0)
    assert not np.array_equal(res.params.V, p.V)


def test_zero_epochs_leave_params_unchanged():
    ds = gen_random_walks(5, 4, seed=0)
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    res = train(p, ds, TrainConfig(epochs=0))
    assert res.records == [] and len(res.checkpoints) == 0
    for name, arr in p.tensors().items():
        assert getattr(res.params, name).tobytes() == arr.tobytes()


def test_learning_rate_schedule_in_records():
    ds = gen_random_walks(8, 4, seed=0)
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    res = train(p, ds, TrainConfig(learning_rate=0.04, epochs=7, lr_half_period=3, batch_size=4))
    assert [r.lr for r in res.records] == [0.04, 0.04, 0.04, 0.02, 0.02, 0.02, 0.01]
    assert TrainConfig(learning_rate=1.0, lr_half_period=50).lr_at(149) == 0.25


def test_training_is_reproducible_and_reduces_loss():
    ds = gen_random_walks(40, 10, seed=1)
    tr, te = split(ds, 0.5, seed=1)
    cfg = TrainConfig(epochs=4, batch_size=16, learning_rate=2e-2, seed=3)
    runs = [train(init_params("ernn_toy", 5, 2, 10, 2, seed=3), tr, cfg, eval_dataset=te) for _ in range(2)]
    assert runs[0].loss_trace == runs[1].loss_trace
    for a, b in zip(runs[0].checkpoints, runs[1].checkpoints):
        for name, arr in a.tensors().items():
            assert arr.tobytes() == getattr(b, name).tobytes()
    assert runs[0].loss_trace[-1] < runs[0].loss_trace[0]


def test_checkpoint_store_spills_to_disk(tmp_path):
    ds = gen_random_walks(6, 4, seed=0)
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    res = train(p, ds, TrainConfig(epochs=5, batch_size=4, checkpoint_cap=2, checkpoint_dir=str(tmp_path)))
    assert len(res.checkpoints) == 5
    assert len(list(tmp_path.iterdir())) == 3
    assert res.checkpoints[4].V.tobytes() == res.params.V.tobytes()
    assert res.checkpoints[0].V.shape == (3, 3)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported_not_raised():
    ds = gen_random_walks(6, 4, seed=0)
    p = init_params("vanilla_rnn", 3, 2, 4, 1, seed=0, activation="relu")
    res = train(p, ds, TrainConfig(epochs=3, learning_rate=1e300, batch_size=4))
    assert res.diverged_epoch is not None


def test_dimension_mismatch_rejected():
    ds = gen_random_walks(3, 5, seed=0)
    with pytest.raises(ValueError):
        train(init_params("ernn_toy", 3, 2, 4, 1), ds, TrainConfig(epochs=1))


def test_evaluate_ties_and_order():
    p = init_params("ernn_toy", 3, 2, 4, 1, seed=0)
    p = p.replace(cw=np.zeros((2, 3)), cb=np.zeros(2))  # all logits tie
    ds = SequenceDataset(np.zeros((4, 4, 2)), np.array([0, 0, 1, 1]), 2)
    assert evaluate(p, ds) == 0.5
    q = init_params("ernn_toy", 3, 2, 4, 1, seed=1)
    big = gen_random_walks(10, 4, seed=2)
    perm = np.random.default_rng(0).permutation(len(big))
    assert evaluate(q, big) == evaluate(q, big.subset(perm))


def test_indistinguishable_classes_near_chance():
    ds = gen_random_walks(2000, 8, sigma0=1.0, sigma1=1.0, seed=0)
    tr, te = split(ds, 0.5, seed=0)
    res = train(init_params("ernn_toy", 4, 2, 8, 1, seed=0), tr, TrainConfig(epochs=3, batch_size=128), eval_dataset=te)
    assert abs(res.records[-1].test_acc - 0.5) <= 0.03
