import numpy as np
import pytest

from accpulse import synth
from accpulse.errors import CaseFormatError
from accpulse.files import read_case, read_features, write_case, write_features, feature_rows
from accpulse.pipeline import process_recording, table_from_records


@pytest.fixture
def case(tmp_path):
    rec, _ = synth.generate_case(synth.SynthParams(
        pauses=((synth.Segment(synth.ORG_COUPLED, 10.0),),), seed=2))
    write_case(rec, tmp_path / "c")
    return rec, tmp_path / "c"


def test_case_round_trip(case):
    rec, d = case
    back = read_case(d)
    assert back.patient_id == rec.patient_id
    assert back.fs_ecg == rec.fs_ecg and back.fs_acc == rec.fs_acc
    np.testing.assert_allclose(back.ecg, rec.ecg, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(back.acc, rec.acc, rtol=1e-8, atol=1e-9)
    assert back.compression_free == rec.compression_free


def test_one_10s_pause_gives_four_rows(case, tmp_path):
    rec, d = case
    acc, rej = process_recording(read_case(d))
    assert len(acc) + len(rej) == 4
    write_features(tmp_path / "f.csv", feature_rows(acc))
    table = read_features(tmp_path / "f.csv")
    assert len(table) == len(acc)
    np.testing.assert_array_equal(table.X, table_from_records(acc).X)


@pytest.mark.parametrize("corrupt", [
    "t_s,ecg_mv,acc\n0.0,1.0\n",
    "time,ecg,acc\n0.0,1.0,2.0\n",
    "t_s,ecg_mv,acc\n0.0,1.0,x\n",
    "t_s,ecg_mv,acc\n0.1,1.0,1.0\n0.0,1.0,1.0\n",
])
def test_corrupt_signals_named_in_error(case, corrupt):
    _, d = case
    (d / "signals.csv").write_text(corrupt)
    with pytest.raises(CaseFormatError, match="signals.csv"):
        read_case(d)


def test_missing_annotations(case):
    _, d = case
    (d / "annotations.json").unlink()
    with pytest.raises(CaseFormatError, match="annotations.json"):
        read_case(d)
