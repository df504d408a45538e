"""Cosine scoring, archive ranking, fusion, and ranked/score file IO."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrix import (
    EMPTY_FILE_SCORE,
    ArchiveIndex,
    EmbeddingCorpus,
    FusionSpec,
    QuerySpec,
    RankedList,
    ValidationError,
    WeightingScheme,
    build_index,
    cosine,
    fuse_scores,
    query_embedding,
    rank_archive,
    rank_queries,
    rank_scores,
    read_ranked,
    read_scores,
    score_archive,
    score_file,
    write_ranked,
    write_scores,
)
from wrix.aggregate import SpeakerProfile

from conftest import make_embedding
from oracle_utils import oracle_cosine, oracle_rank, oracle_score_archive

UNIFORM = WeightingScheme.uniform()


def profile(label, vector, duration=1.0, file_id="f1"):
    return SpeakerProfile(
        file_id=file_id,
        speaker_label=label,
        vector=np.asarray(vector, dtype=np.float64),
        total_duration_s=duration,
        n_segments=1,
        scheme=UNIFORM,
    )


def random_corpus(rng, n_files, dim, empty_every=7):
    """Random corpus with occasional empty files and tie-prone vectors."""
    embs = []
    file_ids = [f"f{i:03d}" for i in range(n_files)]
    pool = rng.standard_normal((4, dim))  # small pool forces score ties
    for i, file_id in enumerate(file_ids):
        if empty_every and i % empty_every == empty_every - 1:
            continue
        for j in range(int(rng.integers(1, 4))):
            base = pool[rng.integers(0, len(pool))]
            vec = base + 0.01 * rng.standard_normal(dim)
            embs.append(
                make_embedding(
                    vec,
                    file_id,
                    j,
                    speaker=f"spk{int(rng.integers(0, 2))}",
                    duration=float(rng.uniform(0.5, 9.0)),
                    onset=float(j * 10),
                )
            )
    return EmbeddingCorpus(embs), file_ids


class TestCosine:
    def test_parallel_orthogonal_opposite(self):
        assert cosine([1.0, 0.0], [2.0, 0.0]) == pytest.approx(1.0)
        assert cosine([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.0)
        assert cosine([1.0, 0.0], [-5.0, 0.0]) == pytest.approx(-1.0)

    def test_45_degrees(self):
        assert cosine([1.0, 0.0], [1.0, 1.0]) == pytest.approx(1 / math.sqrt(2))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValidationError, match="zero vector"):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError, match="mismatch"):
            cosine([1.0], [1.0, 0.0])

    @given(
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.floats(0.001, 1000.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_oracle_and_scale_invariant(self, u, v, scale):
        if max(map(abs, u)) < 1e-3 or max(map(abs, v)) < 1e-3:
            return
        got = cosine(u, v)
        assert got == pytest.approx(oracle_cosine(u, v), abs=1e-12)
        assert cosine([scale * x for x in u], v) == pytest.approx(got, abs=1e-9)
        assert -1.0 <= got <= 1.0


class TestQueryEmbedding:
    def test_dominant_speaker_wins(self):
        profiles = [
            profile("spk0", [1.0, 0.0], duration=2.0),
            profile("spk1", [0.0, 1.0], duration=9.0),
        ]
        np.testing.assert_array_equal(query_embedding(profiles), [0.0, 1.0])

    def test_duration_tie_breaks_lexicographically(self):
        profiles = [
            profile("spkB", [0.0, 1.0], duration=4.0),
            profile("spkA", [1.0, 0.0], duration=4.0),
        ]
        np.testing.assert_array_equal(query_embedding(profiles), [1.0, 0.0])

    def test_no_speech(self):
        with pytest.raises(ValidationError, match="no speech"):
            query_embedding([])


class TestScoreFile:
    def test_speaker_mode_takes_max_profile(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        score = score_file(index, np.array([0.0, 1.0]), "f1", "speaker")
        assert score == pytest.approx(1.0)

    def test_segment_mode_takes_max_segment(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM, keep_segments=True)
        q = np.array([1.0, 0.0])
        # best single segment is [1, 0] itself; speaker profile is a blend
        assert score_file(index, q, "f1", "segment") == pytest.approx(1.0)
        assert score_file(index, q, "f1", "speaker") < 1.0

    def test_empty_file_sentinel(self, tiny_corpus):
        index = build_index(
            tiny_corpus, UNIFORM, file_ids=["f1", "f2", "f3"], keep_segments=True
        )
        assert score_file(index, np.array([1.0, 0.0]), "f3", "speaker") == EMPTY_FILE_SCORE
        assert score_file(index, np.array([1.0, 0.0]), "f3", "segment") == EMPTY_FILE_SCORE
        assert EMPTY_FILE_SCORE == -1.0

    def test_unknown_mode(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        with pytest.raises(ValidationError, match="mode"):
            score_file(index, np.array([1.0, 0.0]), "f1", "profile")


class TestScoreArchive:
    def test_matches_per_file_scoring(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM, file_ids=["f1", "f2", "f3"])
        q = np.array([0.6, 0.4])
        scores = score_archive(index, q, "speaker")
        assert set(scores) == {"f1", "f2", "f3"}
        for file_id, score in scores.items():
            assert score == pytest.approx(
                score_file(index, q, file_id, "speaker"), abs=1e-12
            )

    def test_exclusion_drops_files(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        scores = score_archive(index, np.array([1.0, 0.0]), "speaker", exclude=["f1"])
        assert set(scores) == {"f2"}

    def test_segment_mode_requires_retention(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        with pytest.raises(ValidationError, match="segment"):
            score_archive(index, np.array([1.0, 0.0]), "segment")

    def test_query_scale_invariance(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        a = score_archive(index, np.array([0.3, 0.7]), "speaker")
        b = score_archive(index, np.array([30.0, 70.0]), "speaker")
        for file_id in a:
            assert a[file_id] == pytest.approx(b[file_id], abs=1e-12)

    @pytest.mark.parametrize("mode", ["speaker", "segment"])
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_random_archives_match_loop_oracle(self, mode, seed):
        rng = np.random.default_rng(seed)
        corpus, file_ids = random_corpus(rng, n_files=25, dim=6)
        index = build_index(corpus, UNIFORM, keep_segments=True, file_ids=file_ids)
        q = rng.standard_normal(6)

        if mode == "segment":
            vectors = {
                f: [e.vector for e in index.segments_for(f)] for f in file_ids
            }
        else:
            vectors = {
                f: [p.vector for p in index.profiles_for(f)] for f in file_ids
            }
        expected = oracle_score_archive(vectors, q)
        got = score_archive(index, q, mode)
        assert set(got) == set(expected)
        for file_id in expected:
            assert got[file_id] == pytest.approx(expected[file_id], abs=1e-10)


class TestRanking:
    def test_descending_with_file_id_tiebreak(self):
        scores = {"b": 0.5, "a": 0.5, "c": 0.9, "d": -1.0}
        ranked = rank_scores(scores, "q1", "speaker", top_r=10)
        assert ranked.file_ids() == ["c", "a", "b", "d"]

    def test_truncates_to_top_r(self):
        scores = {f"f{i}": float(-i) for i in range(8)}
        ranked = rank_scores(scores, "q1", "speaker", top_r=3)
        assert ranked.file_ids() == ["f0", "f1", "f2"]

    def test_top_r_must_be_positive(self):
        with pytest.raises(ValidationError, match="top_r"):
            rank_scores({"a": 1.0}, "q1", "speaker", top_r=0)

    def test_rankedlist_rejects_increasing_scores(self):
        with pytest.raises(ValidationError):
            RankedList("q1", "speaker", entries=(("a", 0.2), ("b", 0.7)))

    def test_rankedlist_rejects_excluded_entry(self):
        with pytest.raises(ValidationError):
            RankedList(
                "q1", "speaker", entries=(("a", 0.2),), excluded=frozenset({"a"})
            )

    @given(
        st.dictionaries(
            st.text("abcdef", min_size=1, max_size=4),
            st.sampled_from([-1.0, 0.0, 0.25, 0.25, 0.9]),
            min_size=1,
            max_size=12,
        ),
        st.integers(1, 15),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_sort_oracle(self, scores, top_r):
        ranked = rank_scores(scores, "q", "speaker", top_r)
        assert list(ranked.entries) == oracle_rank(scores, top_r)

    def test_rank_archive_excludes_query_file(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        ranked = rank_archive(
            index, np.array([1.0, 0.0]), "q1", "speaker", 10, exclude=["f1"]
        )
        assert ranked.file_ids() == ["f2"]
        assert ranked.excluded == frozenset({"f1"})


class TestRankQueries:
    def test_self_exclusion_default(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        queries = [QuerySpec("q1", "f1", "Ada", "AVP")]
        ranked, scores = rank_queries(index, queries, "speaker", top_r=10)
        assert ranked["q1"].file_ids() == ["f2"]
        assert set(scores["q1"]) == {"f2"}

    def test_self_exclusion_off_ranks_own_file_first(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        queries = [QuerySpec("q1", "f1", "Ada", "AVP")]
        ranked, _ = rank_queries(
            index, queries, "speaker", top_r=10, self_exclude=False
        )
        assert ranked["q1"].file_ids()[0] == "f1"
        assert ranked["q1"].entries[0][1] == pytest.approx(1.0)

    def test_query_uses_dominant_speaker(self, tiny_corpus):
        # f1 dominant speaker is spk0 (4 s > 2 s); f2 holds spk0's direction
        index = build_index(tiny_corpus, UNIFORM)
        q = query_embedding(index.profiles_for("f1"))
        expected = score_archive(index, q, "speaker", exclude={"f1"})
        _, scores = rank_queries(
            index, [QuerySpec("q1", "f1", "Ada", "AVP")], "speaker", 10
        )
        assert scores["q1"] == expected

    def test_speechless_query_file_named_in_error(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM, file_ids=["f1", "f2", "f3"])
        with pytest.raises(ValidationError, match="q9.*f3.*no speech"):
            rank_queries(index, [QuerySpec("q9", "f3", "Ada", "AoP")], "speaker", 5)


class TestFusion:
    def test_midpoint(self):
        fused = fuse_scores({"a": 1.0, "b": 0.0}, {"a": 0.0, "b": 1.0}, FusionSpec(0.5))
        assert fused == {"a": 0.5, "b": 0.5}

    def test_lambda_endpoints_reproduce_inputs(self):
        a = {"x": 0.9, "y": -1.0}
        b = {"x": 0.1, "y": 0.4}
        assert fuse_scores(a, b, FusionSpec(1.0)) == a
        assert fuse_scores(a, b, FusionSpec(0.0)) == b

    def test_key_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="disagree"):
            fuse_scores({"a": 1.0}, {"b": 1.0}, FusionSpec(0.5))

    def test_lambda_range_enforced(self):
        for lam in (-0.1, 1.1):
            with pytest.raises(ValidationError):
                FusionSpec(lam)

    @given(
        st.dictionaries(
            st.text("abc", min_size=1, max_size=3),
            st.floats(-1, 1),
            min_size=1,
            max_size=8,
        ),
        st.floats(0, 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_fused_scores_are_convex_combinations(self, scores_a, lam):
        scores_b = {k: -v for k, v in scores_a.items()}
        fused = fuse_scores(scores_a, scores_b, FusionSpec(lam))
        for key, value in fused.items():
            lo = min(scores_a[key], scores_b[key])
            hi = max(scores_a[key], scores_b[key])
            assert lo - 1e-12 <= value <= hi + 1e-12


class TestRankedIO:
    def test_round_trip(self):
        ranked = {
            "q1": rank_scores({"a": 0.9, "b": 0.1}, "q1", "speaker", 5),
            "q2": rank_scores({"a": -1.0, "b": 0.5}, "q2", "speaker", 5),
        }
        buf = io.StringIO()
        write_ranked(ranked.values(), buf)
        loaded = read_ranked(buf.getvalue())
        assert set(loaded) == {"q1", "q2"}
        for query_id in ranked:
            assert loaded[query_id].entries == ranked[query_id].entries

    def test_rank_gap_rejected(self):
        lines = (
            '{"query_id":"q1","rank":1,"file_id":"a","score":0.9}\n'
            '{"query_id":"q1","rank":3,"file_id":"b","score":0.1}\n'
        )
        with pytest.raises(ValidationError, match="contiguous"):
            read_ranked(lines)

    def test_malformed_row_has_line_number(self):
        lines = '{"query_id":"q1","rank":1,"file_id":"a","score":0.9}\n{"nope":1}\n'
        with pytest.raises(ValidationError, match="line 2"):
            read_ranked(lines)


class TestScoresIO:
    def test_round_trip(self):
        per_query = {"q1": {"a": 0.25, "b": -1.0}, "q2": {"a": 1.0, "b": 0.0}}
        buf = io.StringIO()
        write_scores(per_query, buf)
        assert read_scores(buf.getvalue()) == per_query

    def test_duplicate_rejected(self):
        lines = (
            '{"query_id":"q1","file_id":"a","score":0.5}\n'
            '{"query_id":"q1","file_id":"a","score":0.6}\n'
        )
        with pytest.raises(ValidationError, match="duplicate"):
            read_scores(lines)


class TestBuildIndex:
    def test_manifest_widens_universe(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM, file_ids=["f1", "f2", "f3"])
        assert index.file_ids() == ["f1", "f2", "f3"]
        assert index.profiles_for("f3") == ()

    def test_orphan_embeddings_rejected(self, tiny_corpus):
        with pytest.raises(ValidationError, match="absent from the manifest"):
            build_index(tiny_corpus, UNIFORM, file_ids=["f1"])

    def test_empty_corpus_needs_manifest(self):
        with pytest.raises(ValidationError, match="empty corpus"):
            build_index(EmbeddingCorpus([]), UNIFORM)
        index = build_index(EmbeddingCorpus([]), UNIFORM, file_ids=["f1"])
        assert index.file_ids() == ["f1"]

    def test_zero_profile_vector_rejected(self):
        corpus = EmbeddingCorpus(
            [
                make_embedding([1.0, 0.0], "f1", 0),
                make_embedding([-1.0, 0.0], "f1", 1, onset=2.0),
            ]
        )
        with pytest.raises(ValidationError, match="zero"):
            build_index(corpus, UNIFORM)

    def test_profiles_stored_at_f32_precision(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        for file_id in index.file_ids():
            for prof in index.profiles_for(file_id):
                assert prof.vector.dtype == np.float64
                np.testing.assert_array_equal(
                    prof.vector, prof.vector.astype(np.float32).astype(np.float64)
                )

    def test_index_validates_dim(self, tiny_corpus):
        index = build_index(tiny_corpus, UNIFORM)
        with pytest.raises(ValidationError, match="dim"):
            score_archive(index, np.array([1.0, 0.0, 0.0]), "speaker")

    def test_isinstance_archive_index(self, tiny_corpus):
        assert isinstance(build_index(tiny_corpus, UNIFORM), ArchiveIndex)
