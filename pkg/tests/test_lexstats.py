import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lexalign.corpus import Subset
from lexalign.lexstats import (
    CollocationPair,
    LexstatsError,
    build_matrix,
    collocations,
    keyness,
    log_dice,
    log_likelihood,
)
from lexalign.textprep import ContentStream, Pos, Token

from oracles import ll_from_contingency, log_dice_value, window_scan_pairs


def stream(lemmas, doc_id="d", positions=None) -> ContentStream:
    positions = positions or list(range(len(lemmas)))
    tokens = tuple(
        Token(surface=l, lemma=l, pos=Pos.NOUN, position=p)
        for l, p in zip(lemmas, positions)
    )
    return ContentStream(doc_id=doc_id, tokens=tokens, total_tokens=len(tokens))


# --- log-likelihood -------------------------------------------------------


def test_ll_zero_for_equal_relative_frequency():
    assert log_likelihood(2, 100, 1, 50) == 0.0


def test_ll_hand_value():
    assert log_likelihood(10, 1000, 0, 1000) == pytest.approx(
        2 * 10 * math.log(2), abs=1e-12
    )


def test_ll_matches_contingency_oracle():
    rng = random.Random(5)
    for _ in range(300):
        c = rng.randint(10, 10000)
        d = rng.randint(10, 10000)
        a = rng.randint(0, c)
        b = rng.randint(0, d)
        assert log_likelihood(a, c, b, d) == pytest.approx(
            ll_from_contingency(a, c, b, d), abs=1e-9
        )


@given(
    a=st.integers(0, 500),
    b=st.integers(0, 500),
    c=st.integers(500, 5000),
    d=st.integers(500, 5000),
)
def test_ll_symmetric_under_corpus_swap(a, b, c, d):
    assert log_likelihood(a, c, b, d) == pytest.approx(
        log_likelihood(b, d, a, c), rel=1e-12, abs=1e-12
    )


@given(a=st.integers(1, 300), b=st.integers(0, 300))
def test_ll_monotone_in_overused_count(a, b):
    c, d = 1000, 1000
    if a * d <= b * c:
        a = b * c // d + 1
    assert log_likelihood(a + 1, c, b, d) >= log_likelihood(a, c, b, d) - 1e-12


def test_ll_requires_positive_totals():
    with pytest.raises(LexstatsError):
        log_likelihood(1, 0, 1, 10)


# --- keyness --------------------------------------------------------------


def test_keyness_keeps_only_overuse_sorted():
    target = [stream(["drug"] * 10 + ["trial"] * 2 + ["shared"] * 3, "t")]
    reference = [stream(["shared"] * 3 + ["other"] * 12, "r")]
    entries = keyness(target, reference)
    lemmas = [e.lemma for e in entries]
    assert "drug" in lemmas and "trial" in lemmas
    assert "other" not in lemmas  # underused in target
    scores = [e.ll_score for e in entries]
    assert scores == sorted(scores, reverse=True)


def test_keyness_tie_broken_by_lemma():
    target = [stream(["b", "a"], "t")]
    reference = [stream(["z", "z"], "r")]
    entries = keyness(target, reference)
    assert [e.lemma for e in entries] == ["a", "b"]


def test_keyness_top_n_and_threshold():
    target = [stream(["a"] * 9 + ["b"] * 3 + ["c"], "t")]
    reference = [stream(["x"] * 13, "r")]
    assert len(keyness(target, reference, top_n=2)) == 2
    high_only = keyness(target, reference, min_ll=5.0)
    assert all(e.ll_score >= 5.0 for e in high_only)


def test_keyness_rejects_empty():
    with pytest.raises(LexstatsError):
        keyness([stream([], "t")], [stream(["a"], "r")])


def test_keyness_counts_recorded():
    target = [stream(["drug", "drug", "care"], "t")]
    reference = [stream(["care", "care", "care"], "r")]
    entry = {e.lemma: e for e in keyness(target, reference)}["drug"]
    assert (entry.freq_target, entry.freq_reference) == (2, 0)


# --- Log-Dice -------------------------------------------------------------


def test_log_dice_maximum_exact():
    assert log_dice(5, 5, 5) == 14.0
    assert log_dice(1, 1, 1) == 14.0


def test_log_dice_hand_value():
    assert log_dice(1, 2, 2) == 13.0


@given(j=st.integers(1, 100), n=st.integers(1, 100), c=st.integers(1, 100))
def test_log_dice_symmetric_in_frequencies(j, n, c):
    assert log_dice(j, n, c) == log_dice(j, c, n)


@given(j=st.integers(1, 50), n=st.integers(1, 50), c=st.integers(1, 50), k=st.integers(1, 20))
def test_log_dice_scale_invariant(j, n, c, k):
    assert log_dice(k * j, k * n, k * c) == pytest.approx(log_dice(j, n, c), abs=1e-12)


@given(j=st.integers(1, 100), n=st.integers(1, 100), c=st.integers(1, 100))
def test_log_dice_capped_when_joint_below_min(j, n, c):
    j = min(j, n, c)
    d = log_dice(j, n, c)
    assert d <= 14.0
    assert (d == 14.0) == (j == n == c)


# --- collocations ---------------------------------------------------------


def test_collocation_defaults():
    import inspect

    sig = inspect.signature(collocations)
    assert sig.parameters["span"].default == 4
    assert sig.parameters["min_d"].default == 7.0
    assert sig.parameters["top_n"].default == 500


def test_collocations_match_window_scan_oracle():
    rng = random.Random(17)
    vocab = [f"w{i}" for i in range(12)]
    lemmas = [rng.choice(vocab) for _ in range(200)]
    s = stream(lemmas)
    nodes = frozenset(vocab[:4])
    pairs = collocations([s], nodes, span=4, min_d=-100.0, top_n=None)

    oracle = window_scan_pairs(lemmas, list(range(len(lemmas))), nodes, span=4)
    got = {(p.node, p.collocate): p for p in pairs}
    assert set(got) == set(oracle)
    freq = {}
    for l in lemmas:
        freq[l] = freq.get(l, 0) + 1
    for key, joint in oracle.items():
        pair = got[key]
        assert pair.joint_freq == joint
        assert pair.node_freq == freq[key[0]]
        assert pair.collocate_freq == freq[key[1]]
        assert pair.log_dice == log_dice_value(joint, freq[key[0]], freq[key[1]])


def test_collocations_surface_axis_uses_gapped_positions():
    # content-adjacent but 6 apart on the surface axis
    s = stream(["a", "b"], positions=[0, 6])
    nodes = frozenset({"a"})
    assert collocations([s], nodes, span=4, min_d=-100, top_n=None, axis="content")
    assert not collocations([s], nodes, span=4, min_d=-100, top_n=None, axis="surface")


def test_collocations_min_d_filter_and_ranking():
    s = stream(["a", "b"] * 10 + [f"u{i}" for i in range(40)])
    pairs = collocations([s], frozenset({"a"}), span=4, min_d=7.0, top_n=None)
    assert all(p.log_dice >= 7.0 for p in pairs)
    d_values = [p.log_dice for p in pairs]
    assert d_values == sorted(d_values, reverse=True)


def test_collocations_tie_break_lexicographic():
    # symmetric construction: (a,b) and (a,c) share identical statistics
    s = stream(["b", "a", "c"] * 5, positions=[i * 10 + j for i in range(5) for j in (0, 1, 2)])
    pairs = collocations([s], frozenset({"a"}), span=1, min_d=-100, top_n=None, axis="surface")
    keys = [(p.node, p.collocate) for p in pairs if p.node == "a"]
    assert keys == sorted(keys)


def test_collocations_top_n_cuts():
    rng = random.Random(3)
    lemmas = [f"w{rng.randrange(20)}" for _ in range(300)]
    pairs = collocations([stream(lemmas)], frozenset({"w0", "w1"}), min_d=-100, top_n=5)
    assert len(pairs) == 5


def test_collocations_validation():
    with pytest.raises(LexstatsError):
        collocations([stream(["a"])], [], span=4)
    with pytest.raises(LexstatsError):
        collocations([stream(["a"])], ["a"], span=0)


def test_self_pair_not_counted_with_itself():
    s = stream(["a", "a"])
    pairs = collocations([s], frozenset({"a"}), span=4, min_d=-100, top_n=None)
    self_pair = next(p for p in pairs if p.collocate == "a")
    # two occurrences, each pairing with the other once
    assert self_pair.joint_freq == 2
    assert self_pair.log_dice == 14.0


# --- feature matrix -------------------------------------------------------


def pair(node, collocate, subset=None):
    return CollocationPair(
        node=node,
        collocate=collocate,
        joint_freq=1,
        node_freq=1,
        collocate_freq=1,
        log_dice=14.0,
        subset=subset,
    )


def test_matrix_normalization_per_thousand():
    lemmas = []
    for i in range(3):
        lemmas += ["a", "b"]
        lemmas += [f"f{i}-{j}" for j in range(198)]
    s = stream(lemmas, "doc")
    assert len(s) == 600
    matrix = build_matrix([s], [pair("a", "b")], span=1)
    assert matrix.raw[0, 0] == 3
    assert matrix.normalized[0, 0] == pytest.approx(5.0, abs=1e-12)


def test_matrix_constant_feature_dropped_from_z():
    s1 = stream(["a", "b", "x", "c"], "d1")
    s2 = stream(["a", "b", "y", "c", "a", "b", "q", "w"], "d2")
    features = [pair("a", "b"), pair("a", "c")]
    matrix = build_matrix([s1, s2], features, span=1)
    # (a,b) occurs once per 4 words in d1 and twice per 8 in d2: constant rate
    assert matrix.constant_features == ["any:a|b"]
    assert np.all(matrix.z[:, 0] == 0.0)
    z_active, active = matrix.active()
    assert z_active.shape[1] == 1
    assert active[0].feature_id == "any:a|c"


def test_matrix_z_statistics():
    rng = random.Random(23)
    streams = []
    for d in range(10):
        lemmas = []
        for _ in range(rng.randrange(5, 30)):
            lemmas += ["a", "b"] if rng.random() < 0.5 else ["a", "x"]
            lemmas += [f"pad{rng.randrange(50)}"]
        streams.append(stream(lemmas, f"d{d}"))
    matrix = build_matrix(streams, [pair("a", "b"), pair("a", "x")], span=1)
    for col in range(matrix.z.shape[1]):
        if matrix.feature_ids[col] in matrix.constant_features:
            continue
        assert abs(matrix.z[:, col].mean()) < 1e-9
        assert abs(matrix.z[:, col].std() - 1.0) < 1e-9


def test_matrix_raw_normalized_relation_exact():
    rng = random.Random(29)
    streams = []
    for d in range(6):
        lemmas = [rng.choice(["a", "b", "c", "d", "e"]) for _ in range(rng.randrange(20, 90))]
        streams.append(stream(lemmas, f"d{d}"))
    matrix = build_matrix(streams, [pair("a", "b"), pair("b", "c")], span=3)
    counts = np.array(matrix.content_counts, dtype=float)
    reconstructed = matrix.normalized * counts[:, None] / 1000.0
    assert np.allclose(reconstructed, matrix.raw, atol=1e-12)


def test_matrix_excludes_empty_document():
    s1 = stream(["a", "b"], "full")
    s2 = stream([], "empty")
    matrix = build_matrix([s1, s2], [pair("a", "b")], span=1)
    assert matrix.doc_ids == ["full"]


def test_matrix_requires_features():
    with pytest.raises(LexstatsError):
        build_matrix([stream(["a"])], [])


def test_subset_tag_in_feature_id():
    tagged = pair("a", "b", subset=Subset.ENDORSED)
    assert tagged.feature_id == "endorsed:a|b"
