import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accpulse.errors import DegenerateInput
from accpulse.signals import (AR, N_SAMPLES, SC, Recording, Snippet, center,
                              extract_snippets, label_for, prefilter, resample,
                              snippet_starts)


def _recording(duration=60.0, pauses=((10.0, 20.0),), circulation=(), fs_e=500.0,
               fs_a=250.0, seed=0, rhythm=()):
    rng = np.random.default_rng(seed)
    return Recording("p1", 0.1 * rng.standard_normal(int(duration * fs_e)), fs_e,
                     0.1 * rng.standard_normal(int(duration * fs_a)), fs_a,
                     compression_free=tuple(pauses), circulation=tuple(circulation),
                     rhythm=tuple(rhythm))


# resample -------------------------------------------------------------------


def test_resample_constant_is_fixed_point():
    out = resample(np.ones(1000), 500.0, 250.0)
    assert out.size == 500
    np.testing.assert_array_equal(out, 1.0)


def test_resample_identity_at_target_rate(rng):
    x = rng.standard_normal(321)
    out = resample(x, 250.0, 250.0)
    np.testing.assert_array_equal(out, x)
    assert out is not x


def test_resample_sine_matches_analytic():
    t = np.arange(4000) / 1000.0
    out = resample(np.sin(2 * np.pi * 2.0 * t), 1000.0, 250.0)
    t_out = np.arange(out.size) / 250.0
    assert np.max(np.abs(out - np.sin(2 * np.pi * 2.0 * t_out))) < 1e-3


@given(n=st.integers(1, 3000), fs_in=st.sampled_from([100.0, 125.0, 250.0, 300.0, 500.0, 1000.0]))
@settings(max_examples=60, deadline=None)
def test_resample_preserves_duration(n, fs_in):
    out = resample(np.zeros(n), fs_in, 250.0)
    assert abs(out.size / 250.0 - n / fs_in) <= 1.0 / 250.0


def test_resample_empty_raises():
    with pytest.raises(DegenerateInput):
        resample([], 500.0)


# center ---------------------------------------------------------------------


def test_center_examples(rng):
    np.testing.assert_allclose(center([1.0, 2.0, 3.0]), [-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(center(np.zeros(5)), 0.0)
    x = 5.0 + rng.standard_normal(1000)
    assert abs(sum(center(x).tolist())) / 1000 < 1e-12


# snippet cutting --------------------------------------------------------------


@pytest.mark.parametrize("length,expected", [(4.0, 1), (10.0, 4), (3.9, 0)])
def test_snippet_count_examples(length, expected):
    starts = snippet_starts(100.0, 100.0 + length)
    assert len(starts) == expected
    if expected == 4:
        np.testing.assert_allclose(np.array(starts) - 100.0, [0.0, 2.0, 4.0, 6.0])


def test_snippet_count_formula_on_grid():
    for k in range(40, 601):
        length = k / 10.0
        assert len(snippet_starts(7.3, 7.3 + length)) == int(np.floor((length - 4.0) / 2.0 + 1e-9)) + 1


def test_extract_snippets_shape_labels_and_centering():
    rec = _recording(pauses=((10.0, 20.0), (30.0, 33.0)), circulation=((10.0, 20.0),))
    snips = extract_snippets(rec)
    assert len(snips) == 4
    for s in snips:
        assert s.acc.size == N_SAMPLES and s.ecg.size == N_SAMPLES
        assert abs(s.acc.mean()) < 1e-12 and abs(s.ecg.mean()) < 1e-12
        assert s.label == SC and s.pause_index == 0
    assert [s.start_time_s for s in snips] == [10.0, 12.0, 14.0, 16.0]


def test_extract_snippets_stay_in_joint_support():
    rec = Recording("p", np.ones(5000), 250.0, np.ones(4000), 250.0,
                    compression_free=((2.0, 30.0),))
    # ACC ends at 16 s
    snips = extract_snippets(rec)
    assert snips and all(s.start_time_s + 4.0 <= 16.0 + 1e-9 for s in snips)


def test_boundary_labels_by_majority_with_ties_to_ar():
    assert label_for(0.0, 4.0, [(1.0, 10.0)]) == SC  # 3 s of 4
    assert label_for(0.0, 4.0, [(3.0, 10.0)]) == AR  # 1 s of 4
    assert label_for(0.0, 4.0, [(2.0, 10.0)]) == AR  # exact tie
    assert label_for(0.0, 4.0, []) == AR


def test_recording_rejects_bad_intervals():
    with pytest.raises(ValueError):
        _recording(pauses=((5.0, 4.0),))
    with pytest.raises(ValueError):
        _recording(pauses=((5.0, 10.0), (8.0, 12.0)))


# prefilter ------------------------------------------------------------------


def _snip(acc, ecg):
    return Snippet(np.asarray(acc, float), np.asarray(ecg, float), AR, "p", 0.0)


def test_prefilter_examples():
    t = np.arange(N_SAMPLES) / 250.0
    sine = 0.5 * np.sin(2 * np.pi * 2.0 * t)
    assert prefilter(_snip(sine, sine)).accepted

    big = sine.copy()
    big[100] = 25.0
    assert prefilter(_snip(big, sine)) == (False, "acc_amplitude")

    spike = np.full(N_SAMPLES, 0.01)
    spike[::2] *= -1
    spike[500] = 0.4  # max/mean = 0.4 / ((999 * 0.01 + 0.4) / 1000) ~ 38.5
    res = prefilter(_snip(sine, spike))
    assert res == (False, "ecg_peakedness")

    assert prefilter(_snip(np.zeros(N_SAMPLES), sine)) == (False, "degenerate_signal")
    assert prefilter(_snip(sine, 3.0 * np.sign(sine))) == (False, "ecg_amplitude")


def test_prefilter_reason_order():
    a = np.zeros(N_SAMPLES)
    a[0] = 30.0  # amplitude and peakedness both violated
    e = np.zeros(N_SAMPLES)
    e[0] = 3.0
    assert prefilter(_snip(a, e)).reason == "acc_amplitude"
    a[0] = 1.0
    assert prefilter(_snip(a, e)).reason == "ecg_amplitude"


@given(seed=st.integers(0, 10_000), fa=st.booleans(), fe=st.booleans())
@settings(max_examples=50, deadline=None)
def test_prefilter_sign_flip_invariant(seed, fa, fe):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(N_SAMPLES) * rng.uniform(0.1, 8)
    e = rng.standard_normal(N_SAMPLES) * rng.uniform(0.05, 1.0)
    if seed % 3 == 0:
        a[rng.integers(N_SAMPLES)] *= 40
    base = prefilter(_snip(a, e))
    flipped = prefilter(_snip(-a if fa else a, -e if fe else e))
    assert base == flipped
