import numpy as np
import pytest

from app.config import Settings
from app.errors import ContractError, FormatError
from app.nn import tensor as T
from app.nn.layers import PAD_ID, conv1d_same, lstm_step, max_pool_over_time
from app.nn.networks import (
    CLASSIFIER,
    EC_LABELS,
    REGRESSOR,
    ModelBundle,
    config_from_settings,
    extract_features,
    forward,
    load_bundle,
    predict,
    save_bundle,
)
from tests.conftest import make_bundle


def zero_out(bundle: ModelBundle) -> ModelBundle:
    for name, node in bundle.named_parameters().items():
        if name != "embedding":
            node.value = np.zeros_like(node.value)
    return bundle


def test_zero_parameters_give_half_everywhere():
    bundle = zero_out(make_bundle(CLASSIFIER))
    for tokens in ([3], [4, 5, 6], [11, 2, 2, 9, 1]):
        _, ve = forward(bundle, tokens)
        np.testing.assert_array_equal(ve.value, np.full(len(EC_LABELS), 0.5))


def test_single_token_is_conv_of_one_lstm_step():
    bundle = make_bundle(REGRESSOR, seed=4)
    token = 7
    x = bundle.embedding.weights.value[token]
    h, _ = lstm_step(bundle.lstm, x, np.zeros(bundle.config.lstm_units), np.zeros(bundle.config.lstm_units))
    expected = max_pool_over_time(conv1d_same(bundle.conv, h.value[None, :])).value
    v0, _ = forward(bundle, [token])
    np.testing.assert_allclose(v0.value, expected, rtol=0, atol=1e-12)


def test_forward_matches_layer_oracles():
    bundle = make_bundle(REGRESSOR, seed=8)
    tokens = [3, 9, 4, 1]
    units = bundle.config.lstm_units
    h, c = np.zeros(units), np.zeros(units)
    rows = []
    for token in tokens:
        h_node, c_node = lstm_step(bundle.lstm, bundle.embedding.weights.value[token], h, c)
        h, c = h_node.value, c_node.value
        rows.append(h)
    hidden = np.stack(rows)
    weights = bundle.conv.weights.value
    padded = np.vstack([hidden, np.zeros((bundle.config.kernel_size - 1, units))])
    conv = np.array(
        [
            [np.sum(weights[f] * padded[t : t + bundle.config.kernel_size]) + bundle.conv.bias.value[f] for f in range(weights.shape[0])]
            for t in range(len(tokens))
        ]
    )
    v0_expected = np.maximum(conv, 0.0).max(axis=0)
    ve_expected = 1.0 / (1.0 + np.exp(-(bundle.dense.weights.value @ v0_expected + bundle.dense.bias.value)))

    v0, ve = forward(bundle, tokens)
    np.testing.assert_allclose(v0.value, v0_expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(ve.value, ve_expected, rtol=0, atol=1e-12)
    assert np.all((ve.value > 0) & (ve.value < 1))


def test_forward_contract_errors():
    bundle = make_bundle(REGRESSOR)
    with pytest.raises(ContractError):
        forward(bundle, [])
    with pytest.raises(ContractError):
        forward(bundle, [PAD_ID, PAD_ID])
    with pytest.raises(ContractError):
        forward(bundle, [3, 99])


def test_forward_truncates_and_strips_trailing_padding():
    bundle = make_bundle(REGRESSOR)
    np.testing.assert_array_equal(predict(bundle, [3, 4, PAD_ID, PAD_ID]), predict(bundle, [3, 4]))
    long = list(range(1, 12)) * 10
    np.testing.assert_array_equal(predict(bundle, long), predict(bundle, long[: bundle.config.max_seq_len]))


def test_inference_is_deterministic():
    bundle = make_bundle(CLASSIFIER, dropout=0.5)
    first = predict(bundle, [5, 6, 7])
    second = predict(bundle, [5, 6, 7])
    np.testing.assert_array_equal(first, second)


def test_default_feature_widths():
    settings = Settings()
    eccu = config_from_settings(CLASSIFIER, settings.eccu, settings.embedding_dim, settings.max_seq_len)
    eipu = config_from_settings(REGRESSOR, settings.eipu, settings.embedding_dim, settings.max_seq_len, "joy")
    assert eccu.feature_width == 139
    assert eipu.feature_width == 65

    matrix = np.random.default_rng(0).uniform(-0.05, 0.05, size=(6, settings.embedding_dim))
    matrix[PAD_ID] = 0.0
    bundle = ModelBundle.initialize(eipu, matrix, np.random.default_rng(1))
    features = extract_features(bundle, [2, 3, 4], tweet_id="t1")
    assert features.values.shape == (65,)
    assert features.source == REGRESSOR


def test_extract_features_concatenates_v0_then_ve():
    bundle = make_bundle(CLASSIFIER, seed=2)
    v0, ve = forward(bundle, [4, 2])
    features = extract_features(bundle, [4, 2], tweet_id="x", source="eccu")
    np.testing.assert_array_equal(features.values, np.concatenate([v0.value, ve.value]))
    assert features.tweet_id == "x"


def test_save_load_round_trip_is_bit_exact(tmp_path):
    bundle = make_bundle(CLASSIFIER, seed=3)
    path = tmp_path / "model.bin"
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    assert loaded.config == bundle.config
    assert loaded.vocab_hash == bundle.vocab_hash
    for name, node in bundle.named_parameters().items():
        assert np.array_equal(loaded.named_parameters()[name].value, node.value)
    tokens = [1, 5, 9, 10]
    assert predict(loaded, tokens).tobytes() == predict(bundle, tokens).tobytes()


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "model.bin"
    path.write_bytes(b"gbt-model v1\n")
    with pytest.raises(FormatError):
        load_bundle(path)


def test_frozen_embeddings_are_not_trainable():
    bundle = make_bundle(REGRESSOR)
    assert "embedding" not in bundle.trainable_parameters()
    trainable = make_bundle(REGRESSOR, trainable_embeddings=True)
    assert "embedding" in trainable.trainable_parameters()


def test_classifier_label_order():
    bundle = make_bundle(CLASSIFIER)
    assert bundle.config.labels[0] == "anger"
    assert bundle.config.labels[-1] == "trust"
    assert len(bundle.config.labels) == 11


def test_forward_gradient_reaches_every_trainable_parameter():
    bundle = make_bundle(CLASSIFIER, seed=6)
    _, ve = forward(bundle, [2, 3, 4])
    T.backward(T.total(ve))
    for name, node in bundle.trainable_parameters().items():
        assert node.grad is not None, name
