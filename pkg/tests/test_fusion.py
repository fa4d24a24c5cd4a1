import json

import numpy as np
import pytest

from app.config import Settings
from app.errors import ContractError, FormatError, JoinError
from app.nn.networks import FeatureVector
from app.services.boosting import gbt_train, predict_many
from app.services.fusion import (
    FeatureSet,
    fuse,
    ingest_external_features,
    parse_source_spec,
    select_sources,
    write_features,
)

IDS = [f"t{i}" for i in range(8)]


def random_source(name: str, width: int, seed: int, ids=IDS) -> FeatureSet:
    rng = np.random.default_rng(seed)
    return FeatureSet.from_vectors(name, (FeatureVector(i, name, rng.normal(size=width)) for i in ids))


def test_single_source_passes_through():
    source = random_source("eccu", 4, 0)
    fused = fuse([source])
    for row, tweet_id in enumerate(IDS):
        np.testing.assert_array_equal(fused.matrix[row], source.vectors[tweet_id])


def test_classifier_plus_regressor_width():
    fused = fuse([random_source("eccu", 139, 0), random_source("eipu", 65, 1)])
    assert fused.matrix.shape == (8, 204)
    assert fused.sources == ["eccu", "eipu"]


def test_rows_follow_requested_ids():
    a = random_source("eccu", 3, 0)
    b = random_source("eipu", 2, 1, ids=list(reversed(IDS)))
    order = ["t5", "t1", "t7"]
    fused = fuse([a, b], ids=order)
    for row, tweet_id in enumerate(order):
        np.testing.assert_array_equal(fused.matrix[row], np.concatenate([a.vectors[tweet_id], b.vectors[tweet_id]]))


def test_manifest_reconstructs_matrix():
    sources = [random_source("eccu", 5, 0), random_source("eipu", 3, 1), random_source("deepmoji", 4, 2)]
    fused = fuse(sources)
    manifest = json.loads(fused.manifest_json())
    assert manifest["width"] == 12
    by_name = {s.source: s for s in sources}
    rebuilt = np.hstack(
        [
            np.stack([by_name[group["source"]].vectors[i] for i in fused.ids])
            for group in manifest["columns"]
        ]
    )
    assert rebuilt.tobytes() == fused.matrix.tobytes()


def test_missing_id_names_id_and_source():
    a = random_source("eccu", 3, 0)
    b = random_source("eipu", 2, 1, ids=IDS[:-1])
    with pytest.raises(JoinError) as info:
        fuse([a, b])
    assert info.value.tweet_id == IDS[-1]
    assert info.value.source == "eipu"


def test_fuse_contract_errors():
    with pytest.raises(ContractError):
        fuse([])
    with pytest.raises(ContractError):
        fuse([random_source("eccu", 3, 0), random_source("eccu", 3, 1)])
    with pytest.raises(ContractError):
        random_source("eccu", 3, 0).add("t0", np.zeros(3))
    with pytest.raises(ContractError):
        random_source("eccu", 3, 0).add("new", np.zeros(4))


def test_fear_preset_without_regressor_features_trains():
    settings = Settings()
    preset = settings.fusion_preset("fear")
    assert preset.max_depth == 5
    sources = [random_source("eccu", 6, 0), random_source("eipu", 4, 1), random_source("deepmoji", 3, 2)]
    kept = select_sources(sources, preset.excluded_sources)
    assert [s.source for s in kept] == ["eccu", "deepmoji"]
    fused = fuse(kept)
    y = np.linspace(0.1, 0.9, len(IDS))
    model = gbt_train(
        fused.matrix,
        y,
        max_depth=preset.max_depth,
        learning_rate=preset.learning_rate,
        n_estimators=preset.n_estimators,
        reg_lambda=preset.reg_lambda,
    )
    predictions = predict_many(model, fused.matrix)
    assert predictions.shape == (len(IDS),)
    assert np.all((predictions >= 0) & (predictions <= 1))


def test_select_sources_needs_one_left():
    with pytest.raises(ContractError):
        select_sources([random_source("eipu", 2, 0)], ["eipu"])


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_ingest_well_formed_file(tmp_path):
    path = write_csv(tmp_path / "deepmoji.csv", "id,f0,f1\na,1,2\nb,3.5,-4\nc,0,1e-3\n")
    features = ingest_external_features(path)
    assert features.source == "deepmoji"
    assert features.ids == ["a", "b", "c"]
    assert features.width == 2
    np.testing.assert_array_equal(features.vectors["b"], [3.5, -4.0])


def test_ingest_rejects_nan(tmp_path):
    path = write_csv(tmp_path / "x.csv", "id,f0\na,1\nb,NaN\n")
    with pytest.raises(FormatError) as info:
        ingest_external_features(path)
    assert info.value.line == 3


def test_ingest_rejects_duplicate_id(tmp_path):
    path = write_csv(tmp_path / "x.csv", "id,f0\na,1\nb,2\na,3\n")
    with pytest.raises(FormatError) as info:
        ingest_external_features(path)
    assert "'a'" in str(info.value)
    assert info.value.line == 4


def test_ingest_rejects_ragged_and_non_numeric_rows(tmp_path):
    short = write_csv(tmp_path / "short.csv", "id,f0,f1\na,1,2\nb,3\n")
    with pytest.raises(FormatError) as info:
        ingest_external_features(short)
    assert info.value.line == 3

    words = write_csv(tmp_path / "words.csv", "id,f0\na,1\nb,high\n")
    with pytest.raises(FormatError) as info:
        ingest_external_features(words)
    assert info.value.line == 3

    header = write_csv(tmp_path / "header.csv", "tweet,x\na,1\n")
    with pytest.raises(FormatError):
        ingest_external_features(header)


def test_written_features_read_back_exactly(tmp_path):
    source = random_source("eccu", 4, 3)
    path = tmp_path / "eccu.csv"
    write_features(source, path)
    again = ingest_external_features(path, "eccu")
    assert again.ids == source.ids
    for tweet_id in IDS:
        assert again.vectors[tweet_id].tobytes() == source.vectors[tweet_id].tobytes()


def test_parse_source_spec():
    assert parse_source_spec("deepmoji=feats/dm.csv") == ("deepmoji", "feats/dm.csv")
    with pytest.raises(ContractError):
        parse_source_spec("feats/dm.csv")
