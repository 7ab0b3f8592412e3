import json

import pytest

from flowseg_uda.errors import MissingGroundTruth
from flowseg_uda.evaluate import evaluate_model, evaluate_oracle
from flowseg_uda.model import SegmentationNet

from conftest import TINY


def test_oracle_identity(small_source):
    report = evaluate_oracle(small_source)
    assert (report.j_mean, report.f_mean, report.j_decay, report.f_decay) == (1.0, 1.0, 0.0, 0.0)
    assert len(report.per_sequence) == 3
    assert len(report.sequence_csv().splitlines()) == 1 + 3
    assert report.n_frames == len(small_source)


def test_report_files_stable(tmp_path, small_source):
    model = SegmentationNet(TINY)
    a = evaluate_model(model, small_source)
    b = evaluate_model(model, small_source)
    assert a.to_json() == b.to_json()
    a.write(tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert set(data) == {"fingerprint", "n_frames", "n_sequences", "J", "F", "per_sequence"}
    assert data["fingerprint"] == TINY.fingerprint()
    assert -1 <= data["J"]["decay"] <= 1 and 0 <= data["J"]["recall"] <= 1


def test_missing_ground_truth(small_source):
    with pytest.raises(MissingGroundTruth):
        evaluate_oracle([s.unlabeled() for s in small_source])


def test_dataset_mean_is_mean_of_sequence_means(small_source):
    report = evaluate_model(SegmentationNet(TINY), small_source)
    means = [row["j_mean"] for row in report.per_sequence.values()]
    assert abs(report.j_mean - sum(means) / len(means)) < 1e-12
