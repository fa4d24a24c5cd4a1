import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pytest

from app.errors import ContractError
from app.nn import tensor as T
from app.nn.networks import CLASSIFIER, REGRESSOR, predict
from app.nn.training import MSE, XENT, AdamState, TrainPlan, adam_step, multilabel_xent, mse, train, write_loss_log
from tests.conftest import make_bundle
from tests.gradcheck import check_gradient


@dataclass
class Example:
    ids: Sequence[int]
    y: np.ndarray

    def token_ids(self) -> Sequence[int]:
        return self.ids

    def target(self) -> np.ndarray:
        return self.y


def multilabel_set(n: int = 16, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [Example([2 + i, 18 + i % 3], rng.integers(0, 2, size=11).astype(float)) for i in range(n)]


def intensity_set(n: int = 16):
    return [Example([2 + i, 18 + i % 3], np.array([v])) for i, v in enumerate(np.linspace(0.15, 0.85, n))]


def test_adam_first_step_moves_by_learning_rate():
    state = AdamState(lr=0.01)
    w = T.parameter([1.0, -2.0, 0.5])
    adam_step(state, {"w": w}, {"w": np.array([0.3, -7.0, 1e-3])})
    np.testing.assert_allclose(np.abs(w.value - [1.0, -2.0, 0.5]), 0.01, rtol=0, atol=1e-6)
    np.testing.assert_array_equal(np.sign(w.value - [1.0, -2.0, 0.5]), [-1.0, 1.0, -1.0])


def test_adam_zero_gradient_leaves_parameters():
    state = AdamState()
    w = T.parameter([1.0, 2.0])
    adam_step(state, {"w": w}, {"w": np.zeros(2)})
    np.testing.assert_array_equal(w.value, [1.0, 2.0])


def test_adam_descends_a_quadratic():
    state = AdamState(lr=0.1)
    w = T.parameter([0.0])
    losses = []
    for _ in range(10):
        w.zero_grad()
        diff = T.sub(w, T.constant([3.0]))
        loss = T.mul(diff, diff)
        losses.append(float(loss.value[0]))
        T.backward(loss)
        adam_step(state, {"w": w}, {"w": w.grad})
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_adam_shape_mismatch():
    with pytest.raises(ContractError):
        adam_step(AdamState(), {"w": T.parameter([1.0, 2.0])}, {"w": np.zeros(3)})
    with pytest.raises(ContractError):
        adam_step(AdamState(), {"w": T.parameter([1.0])}, {"v": np.zeros(1)})


def test_multilabel_xent_values():
    y = np.array([1.0, 0.0, 1.0])
    assert float(multilabel_xent(y, y).value[0]) == pytest.approx(0.0, abs=1e-9)
    assert float(multilabel_xent(np.full(11, 0.5), np.zeros(11)).value[0]) == pytest.approx(math.log(2.0), abs=1e-12)

    rng = np.random.default_rng(4)
    p = rng.uniform(0.05, 0.95, size=11)
    labels = rng.integers(0, 2, size=11).astype(float)
    expected = -np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p))
    assert abs(float(multilabel_xent(p, labels).value[0]) - expected) < 1e-12

    with pytest.raises(ContractError):
        multilabel_xent(np.full(11, 0.5), np.zeros(10))


def test_mse_values():
    assert float(mse([0.4], [0.4]).value[0]) == 0.0
    assert float(mse([0.0], [1.0]).value[0]) == 1.0
    assert float(mse([0.2, 0.8], [0.3, 0.4]).value[0]) == pytest.approx(0.085, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_loss_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=11).astype(float)
    check_gradient(lambda p: multilabel_xent(p, labels), [rng.uniform(0.1, 0.9, size=11)], seed, tolerance=1e-6)
    gold = rng.uniform(0, 1, size=3)
    check_gradient(lambda p: mse(p, gold), [rng.uniform(0, 1, size=3)], seed, tolerance=1e-6)


def test_train_plan_rejects_zero_epochs():
    with pytest.raises(ContractError):
        TrainPlan(epochs=0)


def test_train_rejects_label_mismatch():
    bundle = make_bundle(REGRESSOR, vocab_size=24)
    with pytest.raises(ContractError):
        train(bundle, multilabel_set(4), TrainPlan(epochs=1, loss=MSE))


def test_classifier_overfits_small_multilabel_set():
    bundle = make_bundle(CLASSIFIER, vocab_size=24, dim=8, units=16, filters=16, trainable_embeddings=True)
    data = multilabel_set()
    result = train(bundle, data, TrainPlan(epochs=200, batch_size=8, loss=XENT, seed=1), AdamState(lr=0.03))
    hits = [np.array_equal(predict(result.bundle, ex.ids) >= 0.5, ex.y == 1.0) for ex in data]
    assert all(hits)
    assert result.losses[-1] < result.losses[0]


def test_regressor_overfits_small_intensity_set():
    bundle = make_bundle(REGRESSOR, vocab_size=24, dim=6, units=8, filters=8, trainable_embeddings=True)
    data = intensity_set()
    result = train(bundle, data, TrainPlan(epochs=400, batch_size=16, loss=MSE, seed=1), AdamState(lr=0.03))
    errors = [(predict(result.bundle, ex.ids)[0] - ex.y[0]) ** 2 for ex in data]
    assert float(np.mean(errors)) < 1e-3

    early = result.losses[:50]
    blocks = [float(np.mean(early[i : i + 5])) for i in range(0, 50, 5)]
    for before, after in zip(blocks, blocks[1:]):
        assert after <= before * 1.05 + 1e-4


def test_frozen_embeddings_survive_training():
    bundle = make_bundle(REGRESSOR, vocab_size=24)
    before = hashlib.sha256(bundle.embedding.weights.value.tobytes()).hexdigest()
    train(bundle, intensity_set(6), TrainPlan(epochs=3, batch_size=4, seed=2))
    after = hashlib.sha256(bundle.embedding.weights.value.tobytes()).hexdigest()
    assert before == after


def test_same_seed_gives_identical_loss_logs():
    runs = []
    for _ in range(2):
        bundle = make_bundle(CLASSIFIER, vocab_size=24, dropout=0.5, seed=5)
        runs.append(train(bundle, multilabel_set(10), TrainPlan(epochs=3, batch_size=4, loss=XENT, seed=9)).losses)
    assert runs[0] == runs[1]


def test_last_partial_batch_is_trained():
    bundle = make_bundle(REGRESSOR, vocab_size=24)
    data = intensity_set(3)
    before = bundle.dense.bias.value.copy()
    state = AdamState()
    train(bundle, data, TrainPlan(epochs=1, batch_size=2, seed=0, shuffle=False), state)
    assert state.step == 2
    assert not np.array_equal(before, bundle.dense.bias.value)


def test_write_loss_log(tmp_path):
    path = tmp_path / "loss.csv"
    write_loss_log([0.5, 0.25], path)
    lines = path.read_text().splitlines()
    assert lines == ["epoch,loss", "1,0.5", "2,0.25"]
