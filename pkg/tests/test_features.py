import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engage_facets.features import (
    ADDRESSEE_VOCAB,
    DEFAULT_SCHEMA,
    DEFAULT_VFOA_TOPICS,
    NO_TOPIC,
    ONE_HOT_GROUPS_V1,
    VFOA_VOCAB,
    KeywordConfig,
    assemble_features,
    classify_robot_addressee,
    format_keyword_file,
    gaze_speech_alignment,
    indicator,
    mutual_and,
    mutual_laughter,
    mutual_looks,
    one_hot,
    parse_keyword_file,
    participant_talks_during_robot_speech,
    passive_looks_at_active_speaker,
    read_feature_csv,
    robot_addressee,
    robot_topic,
    robot_utterance_activity,
    vfoa_shift,
    write_feature_csv,
)
from engage_facets.timeline import NO_LABEL, FrameTable, discretize

bits = st.lists(st.integers(0, 1), min_size=1, max_size=60)
vfoa_labels = st.sampled_from(list(VFOA_VOCAB.labels) + [NO_LABEL])


def brute_force_changes(stream):
    count = 0
    for i in range(len(stream) - 1):
        if stream[i] != stream[i + 1]:
            count += 1
    return count


class TestOneHot:
    def test_first_label(self):
        assert one_hot(["nao"], VFOA_VOCAB).tolist() == [[1, 0, 0, 0, 0, 0, 0, 0, 0]]

    def test_nolabel_is_zero_row(self):
        assert one_hot([NO_LABEL], VFOA_VOCAB).sum() == 0

    def test_addressee_nolabel_is_a_class(self):
        assert one_hot([NO_LABEL], ADDRESSEE_VOCAB).tolist() == [[1, 0, 0, 0, 0, 0]]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(vfoa_labels | st.text(max_size=4), max_size=40))
    def test_row_sums(self, column):
        sums = one_hot(column, VFOA_VOCAB).sum(axis=1)
        assert set(sums.tolist()) <= {0, 1}


class TestVfoaShift:
    def test_example(self):
        assert vfoa_shift(["nao", "nao", "other", "other", "nao"]).tolist() == [0, 0, 1, 0, 1]

    def test_constant(self):
        assert vfoa_shift(["table"] * 7).tolist() == [0] * 7

    def test_empty(self):
        with pytest.raises(ValueError):
            vfoa_shift([])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(vfoa_labels, min_size=1, max_size=50), st.data())
    def test_duplicate_frame_never_increases(self, stream, data):
        i = data.draw(st.integers(0, len(stream) - 1))
        longer = stream[: i + 1] + [stream[i]] + stream[i + 1 :]
        assert vfoa_shift(longer).sum() <= vfoa_shift(stream).sum()
        assert vfoa_shift(stream).sum() == brute_force_changes(stream)


class TestRobotStreams:
    def test_activity(self):
        utterances = ["hello"] * 5 + [NO_LABEL] * 5
        assert robot_utterance_activity(utterances) == ["Speech"] * 5 + ["Silence"] * 5

    def test_no_utterances(self):
        assert robot_utterance_activity([NO_LABEL] * 3) == ["Silence"] * 3

    @pytest.mark.parametrize(
        "text, expected",
        [
            ("anna, what do you think", "Person1"),
            ("ben your turn", "Person2"),
            ("everyone look here", "GroupExplicit"),
            ("everyone ... anna", "GroupPerson1"),
            ("everyone then ben", "GroupPerson2"),
            ("anna and then everyone", "Person1Group"),
            ("Ben, then both of you", "Person2Group"),
            ("this is a painting", "Group"),
            ("anna and ben", "GroupExplicit"),
            ("annabelle is here", "Group"),
        ],
    )
    def test_addressee_rules(self, text, expected):
        assert classify_robot_addressee(text, KeywordConfig()) == expected

    def test_addressee_silence(self):
        assert robot_addressee([NO_LABEL, "anna, what do you think"]) == ["Silence", "Person1"]

    def test_topic_keyword(self):
        assert robot_topic(["this painting by warhol"]) == ["warhol"]

    def test_topic_silence(self):
        assert robot_topic([NO_LABEL]) == [NO_TOPIC]

    def test_topic_first_in_keyword_order(self):
        # arp appears first in the text, manray first in the keyword list
        assert robot_topic(["arp met manray"]) == ["manray"]

    def test_topic_case_insensitive_whole_word(self):
        assert robot_topic(["WARHOL again", "warholesque", "painting"]) == ["warhol", NO_TOPIC, NO_TOPIC]


class TestMutualAnd:
    def test_example(self):
        assert mutual_and([1, 1, 0], [1, 0, 0]).tolist() == [1, 0, 0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mutual_and([1, 0], [1])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 40).flatmap(lambda n: st.tuples(*[st.lists(st.integers(0, 1), min_size=n, max_size=n)] * 3)))
    def test_algebra(self, streams):
        a, b, c = (np.array(s) for s in streams)
        ab = mutual_and(a, b)
        assert np.array_equal(ab, mutual_and(b, a))
        assert np.array_equal(mutual_and(ab, c), mutual_and(a, mutual_and(b, c)))
        assert np.array_equal(mutual_and(a, a), a)
        assert np.all(ab <= a) and np.all(ab <= b)
        assert ab.sum() <= min(a.sum(), b.sum())


class TestRelational:
    def test_gaze_speech_alignment(self):
        out = gaze_speech_alignment(["painting_warhol", "painting_warhol", "nao"], ["warhol", NO_TOPIC, "warhol"])
        assert out.tolist() == [1, 0, 0]

    def test_no_topic_gives_zeros(self):
        assert gaze_speech_alignment(["painting_arp"] * 4, [NO_TOPIC] * 4).sum() == 0

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.tuples(vfoa_labels, st.sampled_from(["manray", "warhol", "arp", "paintings", NO_TOPIC])), min_size=1),
        st.permutations(["manray", "warhol", "arp", "paintings"]),
    )
    def test_alignment_relabeling_invariance(self, frames, perm):
        vfoa, topic = [list(x) for x in zip(*frames)]
        base = gaze_speech_alignment(vfoa, topic)
        rename = dict(zip(["manray", "warhol", "arp", "paintings"], perm))
        mapping = {v: rename[t] for v, t in DEFAULT_VFOA_TOPICS.items()}
        renamed_topic = [rename.get(t, t) for t in topic]
        assert np.array_equal(base, gaze_speech_alignment(vfoa, renamed_topic, mapping))
        assert np.all(base <= np.array([t != NO_TOPIC for t in topic]))

    def test_talks_during_robot_speech(self):
        assert participant_talks_during_robot_speech([1], ["PLeft"], ["Speech"]).tolist() == [1]
        assert participant_talks_during_robot_speech([1], ["Nao"], ["Speech"]).tolist() == [0]
        assert participant_talks_during_robot_speech([1, 1], ["PRight", "PLeft"], ["Silence"] * 2).sum() == 0
        with pytest.raises(ValueError):
            participant_talks_during_robot_speech([1], ["PLeft"], [])

    def test_mutual_looks(self):
        assert mutual_looks(["other_participant"], ["other_participant"]).tolist() == [1]
        assert mutual_looks(["other_participant"], ["nao"]).tolist() == [0]
        with pytest.raises(ValueError):
            mutual_looks(["nao"], [])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(vfoa_labels, vfoa_labels), min_size=1))
    def test_mutual_looks_equals_and_of_indicators(self, pairs):
        a, b = [list(x) for x in zip(*pairs)]
        oracle = mutual_and(indicator(a, ["other_participant"]), indicator(b, ["other_participant"]))
        assert np.array_equal(mutual_looks(a, b), oracle)

    def test_mutual_laughter(self):
        assert mutual_laughter([1, 1], [0, 1]).tolist() == [0, 1]
        assert mutual_laughter([0, 0], [1, 1]).sum() == 0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 30).flatmap(lambda n: st.tuples(*[st.lists(st.integers(0, 1), min_size=n, max_size=n)] * 2)))
    def test_mutual_laughter_equals_mutual_and(self, streams):
        assert np.array_equal(mutual_laughter(*streams), mutual_and(*streams))

    def test_passive_looks(self):
        assert passive_looks_at_active_speaker(["other_participant"], [1], ["Nao"]).tolist() == [1]
        assert passive_looks_at_active_speaker(["other_participant"], [1], ["PLeft"]).tolist() == [0]

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(
            st.tuples(vfoa_labels, st.integers(0, 1), st.sampled_from(list(ADDRESSEE_VOCAB.labels))), min_size=1
        )
    )
    def test_passive_looks_bounded_by_looking(self, frames):
        vfoa, speaking, addressee = [list(x) for x in zip(*frames)]
        out = passive_looks_at_active_speaker(vfoa, speaking, addressee)
        assert np.all(out <= indicator(vfoa, ["other_participant"]))


class TestSchemaAndAssembly:
    def test_split(self):
        assert len(DEFAULT_SCHEMA) == 39
        assert DEFAULT_SCHEMA.count("contextual") == 34
        assert DEFAULT_SCHEMA.count("relational") == 5
        assert len(set(DEFAULT_SCHEMA.names)) == 39

    def test_one_hot_group_positions(self):
        names = DEFAULT_SCHEMA.names
        for prefix, (start, width) in ONE_HOT_GROUPS_V1.items():
            assert all(n.startswith(prefix + "=") for n in names[start : start + width])

    def test_matrix_invariants(self, short_interaction):
        table = discretize(short_interaction.bundle)
        m = assemble_features(table, "p1")
        assert m.rows.shape == (table.n_frames, 39)
        assert set(np.unique(m.rows).tolist()) <= {0, 1}
        for name, (start, width) in ONE_HOT_GROUPS_V1.items():
            sums = m.rows[:, start : start + width].sum(axis=1)
            assert sums.max() <= 1
            if name in ("robot_activity", "robot_addressee", "addressee"):
                assert np.all(sums == 1)
        # alignment only fires while a topic is being discussed
        topic_on = m.rows[:, 29:33].sum(axis=1)
        assert np.all(m.rows[:, 34] <= topic_on)

    def test_deterministic(self, short_interaction):
        table = discretize(short_interaction.bundle)
        assert assemble_features(table, "p2").rows.tobytes() == assemble_features(table, "p2").rows.tobytes()

    def test_target_swap_symmetry(self, short_interaction):
        table = discretize(short_interaction.bundle)
        swapped_cols = {}
        for key, col in table.columns.items():
            owner, _, channel = key.partition(".")
            owner = {"p1": "p2", "p2": "p1"}.get(owner, owner)
            swapped_cols[f"{owner}.{channel}"] = col
        swapped = FrameTable(table.interaction_id, table.n_frames, table.frame_rate_hz, swapped_cols)
        assert np.array_equal(assemble_features(table, "p1").rows, assemble_features(swapped, "p2").rows)

        m1, m2 = assemble_features(table, "p1").rows, assemble_features(table, "p2").rows
        robot = slice(18, 33)
        assert np.array_equal(m1[:, robot], m2[:, robot])
        # own speaking of one is the other's co-participant speaking
        assert np.array_equal(m1[:, 16], m2[:, 33])
        # symmetric relational features
        assert np.array_equal(m1[:, 36:38], m2[:, 36:38])

    def test_missing_channel_named(self, short_interaction):
        table = discretize(short_interaction.bundle)
        cols = {k: v for k, v in table.columns.items() if k != "p2.vfoa"}
        broken = FrameTable(table.interaction_id, table.n_frames, table.frame_rate_hz, cols)
        with pytest.raises(KeyError, match="p2.vfoa"):
            assemble_features(broken, "p1")

    def test_csv_round_trip(self, short_interaction):
        m = assemble_features(discretize(short_interaction.bundle), "p1")
        text = write_feature_csv(m)
        assert text.splitlines()[0] == "schema_version,v1"
        back = read_feature_csv(text)
        assert np.array_equal(back.rows, m.rows)
        assert (back.interaction_id, back.participant_id) == (m.interaction_id, m.participant_id)


def test_keyword_file_round_trip():
    config = KeywordConfig(person1=("alice",), person2=("bob",), group=("all",), topic=("arp", "warhol"))
    assert parse_keyword_file(format_keyword_file(config)) == config


def test_keyword_file_rejects_bad_kind():
    with pytest.raises(ValueError, match="line 1"):
        parse_keyword_file("painter\twarhol\n")
