import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvc_bench.textscore import (
    ScorerKind,
    bleu4,
    meteor_lite,
    rouge_l,
    score,
    score_sentences,
    stem,
    tokenize,
)
from lvc_bench.textscore.meteor import align, count_chunks
from lvc_bench.textscore.rouge import lcs_length
from oracles import brute_bleu4, brute_lcs, brute_rouge_l

words = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=8)
nonempty_words = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=1, max_size=8)


@pytest.mark.parametrize("text, expected", [
    ("A man, running!", ["a", "man", "running"]),
    ("", []),
    ("It's 5 o'clock.", ["its", "5", "oclock"]),
    ("  (Hello)  [world];  ", ["hello", "world"]),
    ("...", []),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_bleu_identity_and_disjoint():
    s = ["a", "man", "runs", "fast"]
    assert bleu4(s, [s]) == pytest.approx(1.0, abs=1e-6)
    assert bleu4(["a", "b", "c"], [["x", "y", "z", "w"]]) <= 1e-6


def test_bleu_cat_sat_on_mat():
    cand = "the cat sat on mat".split()
    ref = "the cat sat on the mat".split()
    # clipped precisions 5/5, 3/4, 2/3, 1/2 with BP = exp(1 - 6/5)
    hand = (1 * 0.75 * (2 / 3) * 0.5) ** 0.25 * math.exp(1 - 6 / 5)
    assert bleu4(cand, [ref]) == pytest.approx(hand, abs=1e-8)
    assert bleu4(cand, [ref]) == pytest.approx(brute_bleu4(cand, [ref]), abs=1e-12)


def test_bleu_empty_candidate_is_zero():
    assert bleu4([], [["a"]]) == 0.0
    with pytest.raises(ValueError):
        bleu4(["a"], [])


def test_bleu_short_candidate_vacuous_orders():
    # orders 2..4 are vacuous for a single token: the score is p1 * BP
    assert bleu4(["a"], [["a"]]) == pytest.approx(1.0 ** 0.25, abs=1e-9)
    assert bleu4(["a"], [["a", "b"]]) == pytest.approx(math.exp(1 - 2), abs=1e-9)


def test_bleu_clips_against_best_reference_per_ngram():
    cand = ["the", "the", "the"]
    refs = [["the", "cat"], ["the", "the", "dog"]]
    assert bleu4(cand, refs) == pytest.approx(brute_bleu4(cand, refs), abs=1e-12)


@pytest.mark.parametrize("cand, ref, want", [
    (list("abcd"), list("abcd"), 1.0),
    (list("abcd"), list("acbd"), 0.75),
    (list("abc"), list("xyz"), 0.0),
])
def test_rouge_examples(cand, ref, want):
    assert rouge_l(cand, [ref]) == pytest.approx(want, abs=1e-12)


def test_rouge_identity_exact():
    s = "a man rides a horse".split()
    assert rouge_l(s, [s]) == 1.0


@given(words, words)
def test_lcs_matches_bruteforce(a, b):
    assert lcs_length(a, b) == brute_lcs(a, b)


def test_meteor_examples():
    assert meteor_lite(list("abcd"), [list("abcd")]) == pytest.approx(0.9921875, abs=1e-12)
    assert meteor_lite(["a", "b"], [["x", "y"]]) == 0.0
    assert meteor_lite(["dogs", "run"], [["dog", "runs"]]) == pytest.approx(0.9375, abs=1e-12)


def test_meteor_chunks_and_fmean():
    cand = "the cat sat on the mat".split()
    ref = "on the mat sat the cat".split()
    pairs = align(cand, ref)
    assert len(pairs) == 6
    chunks = count_chunks(pairs)
    # m = 6, P = R = 1
    assert meteor_lite(cand, [ref]) == pytest.approx(1 - 0.5 * (chunks / 6) ** 3, abs=1e-12)


def test_meteor_stem_stage_only_uses_leftovers():
    # "run" is matched exactly first; "running" then stems onto "runs"
    pairs = align(["run", "running"], ["runs", "run"])
    assert pairs == [(0, 1), (1, 0)]


@pytest.mark.parametrize("kind", list(ScorerKind))
def test_score_dispatch_identity(kind):
    s = "a man is playing the drums".split()
    want = {ScorerKind.BLEU4: 1.0, ScorerKind.ROUGE_L: 1.0,
            ScorerKind.METEOR_LITE: 1 - 0.5 / len(s) ** 3}[kind]
    assert score(kind, s, [s]) == pytest.approx(want, abs=1e-6)


def test_score_sentences_tokenizes():
    assert score_sentences(ScorerKind.ROUGE_L, "A man runs.", ["a man runs"]) == 1.0


def test_scorer_kind_parse():
    assert ScorerKind.parse("bleu4") is ScorerKind.BLEU4
    assert ScorerKind.parse("Rouge-L") is ScorerKind.ROUGE_L
    assert ScorerKind.parse("meteor") is ScorerKind.METEOR_LITE
    with pytest.raises(ValueError):
        ScorerKind.parse("cider")


@settings(max_examples=300)
@given(words, st.lists(words, min_size=1, max_size=3))
def test_random_pairs_match_oracles(cand, refs):
    assert bleu4(cand, refs) == pytest.approx(brute_bleu4(cand, refs), abs=1e-9)
    assert rouge_l(cand, refs) == pytest.approx(brute_rouge_l(cand, refs), abs=1e-9)


@settings(max_examples=300)
@given(words, st.lists(words, min_size=1, max_size=3))
def test_scores_in_unit_interval(cand, refs):
    for kind in ScorerKind:
        assert 0.0 <= score(kind, cand, refs) <= 1.0


@settings(max_examples=200)
@given(words, st.lists(words, min_size=1, max_size=3))
def test_duplicate_reference_invariance(cand, refs):
    for kind in ScorerKind:
        assert score(kind, cand, refs + [refs[0]]) == score(kind, cand, refs)


@settings(max_examples=200)
@given(words, st.lists(words, min_size=1, max_size=3), words)
def test_adding_reference_never_hurts_max_scorers(cand, refs, extra):
    for kind in (ScorerKind.ROUGE_L, ScorerKind.METEOR_LITE):
        assert score(kind, cand, refs + [extra]) >= score(kind, cand, refs)


@settings(max_examples=200)
@given(nonempty_words, nonempty_words, st.data())
def test_bleu_same_length_reference_keeps_brevity_and_never_decreases(cand, ref, data):
    extra = data.draw(st.lists(st.sampled_from(list("abcde")), min_size=len(ref), max_size=len(ref)))
    before = bleu4(cand, [ref])
    after = bleu4(cand, [ref, extra])
    assert after >= before - 1e-15
    if extra == ref:
        assert after == before


# classic pairs from Porter's 1980 description
@pytest.mark.parametrize("word, want", [
    ("caresses", "caress"), ("ponies", "poni"), ("ties", "ti"), ("cats", "cat"),
    ("feed", "feed"), ("agreed", "agre"), ("plastered", "plaster"), ("bled", "bled"),
    ("motoring", "motor"), ("sing", "sing"), ("conflated", "conflat"),
    ("hopping", "hop"), ("falling", "fall"), ("filing", "file"), ("happy", "happi"),
    ("relational", "relat"), ("generalizations", "gener"), ("oscillators", "oscil"),
    ("dogs", "dog"), ("runs", "run"), ("a", "a"), ("is", "is"),
])
def test_porter_classic(word, want):
    assert stem(word) == want


def test_porter_matches_nltk_original_mode():
    porter = pytest.importorskip("nltk.stem.porter")
    ref = porter.PorterStemmer(mode=porter.PorterStemmer.ORIGINAL_ALGORITHM)
    rng = random.Random(7)
    vocab = """running jumped easily relational conditional rational valenci hesitanci
    digitizer conformabli radicalli differentli vileli analogousli vietnamization
    predication operator feudalism decisiveness hopefulness callousness formaliti
    sensitiviti sensibiliti triplicate formative formalize electriciti electrical
    hopeful goodness revival allowance inference airliner gyroscopic adjustable
    defensible irritant replacement adjustment dependent adoption homologou communism
    activate angulariti homologous effective bowdlerize probate rate cease controll
    roll skating skier skis bicycles riding playing talking standing people woman
    women children plays crowds cheering dancing dances gymnast performs flips""".split()
    letters = "abcdefghilmnoprstuy"
    vocab += ["".join(rng.choice(letters) for _ in range(rng.randint(3, 10))) for _ in range(3000)]
    mismatches = [(w, stem(w), ref.stem(w)) for w in vocab if stem(w) != ref.stem(w)]
    assert mismatches == []


def test_symmetry_reduction_matches_plain_enumeration():
    from itertools import permutations, product

    from exhaustive import ALPHABET, representative_pairs

    max_len = 3
    seen, classes = set(), 0
    for lc in range(max_len + 1):
        for lr in range(max_len + 1):
            for c in product(ALPHABET, repeat=lc):
                for r in product(ALPHABET, repeat=lr):
                    if (c, r) in seen:
                        continue
                    classes += 1
                    for perm in permutations(ALPHABET):
                        m = dict(zip(ALPHABET, perm))
                        cc, rr = tuple(m[x] for x in c), tuple(m[x] for x in r)
                        seen.update({(cc, rr), (cc[::-1], rr[::-1])})
    reps = list(representative_pairs(max_len))
    assert sum(len(C) for _, _, C, _, _ in reps) == classes
    assert sum(int(w.sum()) for *_, w in reps) == len(seen) == sum(
        4 ** (a + b) for a in range(max_len + 1) for b in range(max_len + 1))
