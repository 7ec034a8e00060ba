import numpy as np
import pytest

from synlin.corpus import bag_from_forms, to_bag
from synlin.errors import IllegalActionError, StateError
from synlin.transition import (
    Action,
    apply,
    initial_state,
    legal_actions,
    realized_sentence,
)

POS_TAGS = ("NNP", "PRP", "VBP")
LABELS = ("dobj", "nsubj")


def start(forms, variant="light"):
    return initial_state(bag_from_forms(forms), variant, POS_TAGS, LABELS)


def run(state, *action_names):
    for name in action_names:
        state = apply(state, Action.parse(name))
    return state


class TestInitialState:
    def test_table2_init(self):
        st = start(["NLP", "love", "I"])
        assert st.stack == ()
        assert st.arcs == frozenset()
        assert len(st.remaining) == 3
        assert st.history == ()

    def test_single(self):
        st = start(["Go"])
        assert len(st.remaining) == 1

    def test_empty_bag(self):
        with pytest.raises(StateError):
            initial_state([], "light")

    def test_unknown_variant(self):
        with pytest.raises(StateError):
            initial_state(bag_from_forms(["a"]), "medium")


class TestLegalActions:
    def test_all_shifted_no_end_no_shift(self):
        st = run(start(["I", "love", "NLP"]), "Shift-I", "Shift-love", "Shift-NLP")
        acts = {a.name() for a in legal_actions(st)}
        assert acts == {"LArc", "RArc"}

    def test_single_tree_only_end(self):
        st = run(
            start(["I", "love", "NLP"]), "Shift-I", "Shift-love", "Shift-NLP", "RArc", "LArc"
        )
        assert {a.name() for a in legal_actions(st)} == {"End"}

    def test_full_after_shift_only_pos(self):
        st = run(start(["I", "love"], variant="full"), "Shift-I")
        acts = legal_actions(st)
        assert {a.kind for a in acts} == {"Pos"}
        assert {a.arg for a in acts} == set(POS_TAGS)

    def test_full_arcs_carry_all_labels(self):
        st = run(
            start(["I", "love"], variant="full"), "Shift-I", "Pos-PRP", "Shift-love", "Pos-VBP"
        )
        acts = {a.name() for a in legal_actions(st)}
        assert acts == {"LArc-dobj", "LArc-nsubj", "RArc-dobj", "RArc-nsubj"}

    def test_terminal_has_none(self):
        st = run(start(["Go"]), "Shift-Go", "End")
        assert legal_actions(st) == ()

    def test_shift_actions_per_distinct_form(self):
        st = start(["the", "dog", "the"])
        shifts = [a for a in legal_actions(st) if a.kind == "Shift"]
        assert sorted(a.arg for a in shifts) == ["dog", "the"]


class TestApply:
    def test_table2_trace(self):
        # token ids follow construction order: I=1, love=2, NLP=3
        st = start(["I", "love", "NLP"], variant="full")
        st = run(
            st,
            "Shift-I",
            "Pos-PRP",
            "Shift-love",
            "Pos-VBP",
            "Shift-NLP",
            "Pos-NNP",
        )
        assert [it.root.form for it in st.stack] == ["I", "love", "NLP"]
        st = apply(st, Action.parse("RArc-dobj"))
        assert [it.root.form for it in st.stack] == ["I", "love"]
        assert (2, 3, "dobj") in st.arcs
        st = apply(st, Action.parse("LArc-nsubj"))
        assert [it.root.form for it in st.stack] == ["love"]
        assert (2, 1, "nsubj") in st.arcs
        st = apply(st, Action.parse("End"))
        assert [t.form for t in realized_sentence(st)] == ["I", "love", "NLP"]

    def test_in_order_traversal(self):
        # bit with left subtree (the dog) and right subtree (the man)
        st = start(["the", "dog", "bit", "the", "man"])
        st = run(
            st,
            "Shift-the",
            "Shift-dog",
            "LArc",
            "Shift-bit",
            "LArc",
            "Shift-the",
            "Shift-man",
            "LArc",
            "RArc",
            "End",
        )
        assert [t.form for t in realized_sentence(st)] == ["the", "dog", "bit", "the", "man"]

    def test_illegal_action(self):
        st = start(["Go"])
        with pytest.raises(IllegalActionError, match="LArc"):
            apply(st, Action.parse("LArc"))

    def test_shift_not_in_bag(self):
        st = start(["Go"])
        with pytest.raises(IllegalActionError):
            apply(st, Action.parse("Shift-stop"))

    def test_determinism_and_immutability(self):
        st = start(["a", "b"])
        before = (st.stack, st.remaining, st.arcs, st.history)
        s1 = apply(st, Action.parse("Shift-a"))
        s2 = apply(st, Action.parse("Shift-a"))
        assert s1 == s2
        assert (st.stack, st.remaining, st.arcs, st.history) == before

    def test_duplicate_shift_consumes_lowest_tid(self):
        st = start(["the", "x", "the"])  # tids: the=1, x=2, the=3
        st = apply(st, Action.parse("Shift-the"))
        assert st.stack[-1].root.tid == 1
        st = apply(st, Action.parse("Shift-the"))
        assert st.stack[-1].root.tid == 3


class TestDerivationProperties:
    @pytest.mark.parametrize("variant", ["full", "light"])
    def test_random_walks_terminate_at_fixed_length(self, variant):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(1, 7))
            forms = [f"w{rng.integers(0, 4)}" for _ in range(n)]
            st = start(forms, variant=variant)
            while True:
                acts = legal_actions(st)
                if not acts:
                    break
                st = apply(st, acts[rng.integers(0, len(acts))])
            assert st.terminal
            assert len(st.history) == (3 * n if variant == "full" else 2 * n)
            assert len(st.arcs) == n - 1
            assert len(realized_sentence(st)) == n

    def test_conservation(self):
        rng = np.random.default_rng(9)
        st = start([f"w{i%3}" for i in range(6)])
        n = st.n_tokens
        while True:
            acts = legal_actions(st)
            if not acts:
                break
            st = apply(st, acts[rng.integers(0, len(acts))])
            assert st.n_tokens == n

    def test_realized_requires_terminal(self):
        st = start(["Go"])
        with pytest.raises(StateError):
            realized_sentence(st)


class TestActionParsing:
    def test_roundtrip(self):
        for name in ["Shift-love", "Pos-PRP", "LArc-nsubj", "RArc", "End", "Shift-re-elect"]:
            assert Action.parse(name).name() == name

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Action.parse("Jump-now")
