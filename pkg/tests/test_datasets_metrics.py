import itertools

import numpy as np
import pytest

from app.errors import ContractError, FormatError, JoinError, UndefinedCorrelationError
from app.nn.networks import EC_LABELS
from app.services.datasets import (
    EC_TASK,
    EIREG_TASK,
    TweetRecord,
    encode_records,
    load_ec,
    load_eireg,
    load_records,
    read_predictions,
    write_predictions,
    write_tokens,
)
from app.services.metrics import (
    EvalReport,
    evaluate_intensity,
    evaluate_multilabel,
    multilabel_metrics,
    pearson,
    threshold,
)
from app.services.preprocess import TokenSequence, Vocabulary


EC_HEADER = "\t".join(["ID", "Tweet", *EC_LABELS])


def ec_file(tmp_path, rows):
    path = tmp_path / "ec.txt"
    path.write_text("\n".join([EC_HEADER, *rows]) + "\n", encoding="utf-8")
    return path


def eireg_file(tmp_path, rows):
    path = tmp_path / "eireg.txt"
    header = "ID\tTweet\tAffect Dimension\tIntensity Score"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def labels_cells(bits):
    return "\t".join(str(b) for b in bits)


def test_load_ec_two_rows(tmp_path):
    first = [1, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0]
    second = [0] * 11
    path = ec_file(
        tmp_path,
        [
            f"2018-En-01\tSo ANGRY right now! @bob\t{labels_cells(first)}",
            f"2018-En-02\t#goodmorning all\t{labels_cells(second)}",
        ],
    )
    records = load_ec(path)
    assert [r.id for r in records] == ["2018-En-01", "2018-En-02"]
    np.testing.assert_array_equal(records[0].labels, first)
    assert records[0].task == EC_TASK
    assert records[0].tokens.tokens == ("so", "angry", "right", "now", "!", "<user>")
    assert records[1].tokens.tokens[0] == "<hashtag>"


def test_load_ec_rejects_non_binary_label(tmp_path):
    bits = ["0"] * 11
    bits[4] = "2"
    path = ec_file(tmp_path, [f"a\tfine\t{labels_cells([0] * 11)}", f"b\tnope\t{chr(9).join(bits)}"])
    with pytest.raises(FormatError) as info:
        load_ec(path)
    assert info.value.line == 3


def test_load_ec_rejects_wrong_column_count(tmp_path):
    path = ec_file(tmp_path, [f"a\tfine\t{labels_cells([0] * 10)}"])
    with pytest.raises(FormatError) as info:
        load_ec(path)
    assert info.value.line == 2


def test_load_eireg_filters_emotion(tmp_path, caplog):
    path = eireg_file(
        tmp_path,
        [
            "a1\tI am furious\tanger\t0.875",
            "j1\tSo happy today\tjoy\t0.6",
            "a2\tmildly annoyed\tanger\t0.25",
        ],
    )
    with caplog.at_level("INFO", logger="app.services.datasets"):
        records = load_eireg(path, "anger")
    assert [r.id for r in records] == ["a1", "a2"]
    assert records[0].intensity == 0.875
    assert records[0].task == EIREG_TASK
    assert records[0].target().tolist() == [0.875]
    assert "skipped 1" in caplog.text


def test_load_eireg_rejects_out_of_range(tmp_path):
    path = eireg_file(tmp_path, ["a1\tI am furious\tanger\t1.2"])
    with pytest.raises(FormatError) as info:
        load_eireg(path, "anger")
    assert info.value.line == 2


def test_load_records_dispatch(tmp_path):
    path = eireg_file(tmp_path, ["a1\tI am furious\tanger\t0.5"])
    vocab = Vocabulary.build([["i", "am", "furious"]])
    records = load_records(path, EIREG_TASK, "anger", vocab=vocab)
    assert len(records[0].token_ids()) == 3
    with pytest.raises(ContractError):
        load_records(path, EIREG_TASK)
    with pytest.raises(ContractError):
        load_records(path, "sentiment")


def test_tweet_record_invariants():
    tokens = TokenSequence(("hi",))
    with pytest.raises(ContractError):
        TweetRecord("x", "hi", tokens)
    with pytest.raises(ContractError):
        TweetRecord("x", "hi", tokens, labels=np.zeros(11, dtype=int), intensity=0.3)
    with pytest.raises(ContractError):
        TweetRecord("x", "hi", tokens, intensity=1.5)
    record = TweetRecord("x", "hi", tokens, intensity=0.3)
    with pytest.raises(ContractError):
        record.token_ids()
    encoded = encode_records([record], Vocabulary.build([["hi"]]))[0]
    assert encoded.token_ids() == (6,)


def test_write_tokens(tmp_path):
    record = TweetRecord("x", "hi there", TokenSequence(("hi", "there")), intensity=0.3)
    path = tmp_path / "tokens.tsv"
    write_tokens([record], path)
    assert path.read_text().splitlines() == ["id\ttokens", "x\thi there"]


def test_predictions_round_trip(tmp_path):
    path = tmp_path / "pred.csv"
    write_predictions(["a", "b"], np.array([0.25, 1 / 3]), path, ("anger",))
    assert read_predictions(path)["b"][0] == 1 / 3

    multi = tmp_path / "multi.csv"
    write_predictions(["a"], np.ones((1, 11)), multi, EC_LABELS)
    header = multi.read_text().splitlines()[0]
    assert header == ",".join(["id", *EC_LABELS])
    assert read_predictions(multi)["a"].tolist() == [1.0] * 11


def test_read_predictions_rejects_duplicates(tmp_path):
    path = tmp_path / "pred.csv"
    path.write_text("id,value\na,0.1\na,0.2\n")
    with pytest.raises(FormatError) as info:
        read_predictions(path)
    assert info.value.line == 3


def test_pearson_examples():
    gold = np.array([0.1, 0.5, 0.3, 0.9])
    assert pearson(gold, gold) == 1.0
    assert pearson(-gold, gold) == -1.0
    assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)


def test_pearson_affine_invariance():
    rng = np.random.default_rng(0)
    pred, gold = rng.uniform(size=30), rng.uniform(size=30)
    assert abs(pearson(2 * pred + 3, gold) - pearson(pred, gold)) < 1e-12
    assert abs(pearson(pred, 0.5 * gold - 1) - pearson(pred, gold)) < 1e-12


def test_pearson_errors():
    with pytest.raises(UndefinedCorrelationError):
        pearson([0.5, 0.5, 0.5], [0.1, 0.2, 0.3])
    with pytest.raises(ContractError):
        pearson([0.1, 0.2], [0.1, 0.2, 0.3])
    with pytest.raises(ContractError):
        pearson([0.1], [0.1])


def brute_force(pred, gold):
    jaccards = []
    for p, g in zip(pred, gold):
        ps = {i for i, v in enumerate(p) if v}
        gs = {i for i, v in enumerate(g) if v}
        jaccards.append(1.0 if not ps | gs else len(ps & gs) / len(ps | gs))

    def f1(tp, fp, fn):
        return 0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)

    counts = []
    for label in range(len(pred[0])):
        tp = sum(1 for p, g in zip(pred, gold) if p[label] and g[label])
        fp = sum(1 for p, g in zip(pred, gold) if p[label] and not g[label])
        fn = sum(1 for p, g in zip(pred, gold) if not p[label] and g[label])
        counts.append((tp, fp, fn))
    micro = f1(*(sum(c[i] for c in counts) for i in range(3)))
    macro = sum(f1(*c) for c in counts) / len(counts)
    return sum(jaccards) / len(jaccards), micro, macro


def test_multilabel_perfect_prediction_covering_every_label():
    gold = np.vstack([np.eye(11, dtype=int), [1, 0, 1] + [0] * 8])
    assert multilabel_metrics(gold, gold) == (1.0, 1.0, 1.0)


def test_multilabel_labels_without_support_score_zero_f1():
    gold = np.array([[1, 0, 1] + [0] * 8, [0] * 10 + [1]])
    jaccard, micro, macro = multilabel_metrics(gold, gold)
    assert (jaccard, micro) == (1.0, 1.0)
    assert macro == pytest.approx(3 / 11)
    zeros = np.zeros((3, 11), dtype=int)
    assert multilabel_metrics(zeros, zeros)[0] == 1.0


def test_multilabel_against_brute_force():
    rng = np.random.default_rng(0)
    patterns = list(itertools.product((0, 1), repeat=11))
    for _ in range(300):
        n = int(rng.integers(1, 5))
        pred = [patterns[i] for i in rng.integers(0, len(patterns), size=n)]
        gold = [patterns[i] for i in rng.integers(0, len(patterns), size=n)]
        if rng.random() < 0.2:
            pred[0] = gold[0] = (0,) * 11
        got = multilabel_metrics(np.array(pred), np.array(gold))
        expected = brute_force(pred, gold)
        for a, b in zip(got, expected):
            assert a == pytest.approx(b, abs=1e-12)


def test_multilabel_errors():
    with pytest.raises(ContractError):
        multilabel_metrics(np.zeros((2, 11)), np.zeros((3, 11)))
    with pytest.raises(ContractError):
        multilabel_metrics(np.full((1, 11), 2), np.zeros((1, 11)))


def test_threshold_is_inclusive():
    assert threshold([0.49, 0.5, 0.51]).tolist() == [0, 1, 1]


def intensity_record(tweet_id, value):
    return TweetRecord(tweet_id, "t", TokenSequence(("t",)), intensity=value, emotion="joy")


def test_evaluate_intensity_reports_pearson(tmp_path):
    records = [intensity_record("a", 0.1), intensity_record("b", 0.4), intensity_record("c", 0.8)]
    predictions = {"a": np.array([0.1]), "b": np.array([0.4]), "c": np.array([0.8])}
    report = evaluate_intensity(predictions, records, "abc123", model_name="EIPU")
    assert report.metrics["pearson"] == 1.0
    assert report.per_emotion == {"joy": {"pearson": 1.0}}
    text = report.to_text()
    assert "pearson      1.0000" in text
    assert "config fingerprint: abc123" in text

    path = tmp_path / "report.csv"
    report.to_csv(path)
    assert path.read_text().splitlines()[0] == "task,fingerprint,scope,metric,value"

    with pytest.raises(JoinError):
        evaluate_intensity({"a": np.array([0.1])}, records, "abc123")


def test_evaluate_multilabel_thresholds_scores():
    gold_bits = np.zeros(11, dtype=np.int64)
    gold_bits[[0, 4]] = 1
    record = TweetRecord("a", "t", TokenSequence(("t",)), labels=gold_bits)
    scores = np.full(11, 0.2)
    scores[[0, 4]] = 0.7
    report = evaluate_multilabel({"a": scores}, [record], "fp")
    assert report.metrics == {"jaccard": 1.0, "micro_f1": 1.0, "macro_f1": pytest.approx(2 / 11)}
    assert report.per_emotion["anger"] == {"f1": 1.0}


def test_report_ranges_are_checked():
    with pytest.raises(ContractError):
        EvalReport(EIREG_TASK, {"pearson": 1.5}, "fp")
    with pytest.raises(ContractError):
        EvalReport(EC_TASK, {"jaccard": -0.1}, "fp")
    assert EvalReport(EIREG_TASK, {"pearson": -0.5}, "fp").metrics["pearson"] == -0.5
