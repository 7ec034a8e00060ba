"""Stack-context features for the action scorer.

The labeled system reads 42 ids from the top of the stack: word and POS of
the top three items, word/POS/label of the first and second outermost left
and right children of the top two, and word/POS/label of the outermost
grandchildren lc1(lc1(.)) / rc1(rc1(.)) of the top two.  The word-only
system keeps just the 15 word slots.  Absent referents fill with the
padding ids.  Nothing is ever read from the remaining word set.
"""

from __future__ import annotations

from dataclasses import dataclass

from synlin.corpus import Indexers
from synlin.transition import StackItem, State

# Referent names in slot order; recorded in model containers so a saved
# model documents its own input layout.
WORD_SLOTS = (
    "s1",
    "s2",
    "s3",
    "lc1(s1)",
    "lc2(s1)",
    "rc1(s1)",
    "rc2(s1)",
    "lc1(s2)",
    "lc2(s2)",
    "rc1(s2)",
    "rc2(s2)",
    "lc1(lc1(s1))",
    "rc1(rc1(s1))",
    "lc1(lc1(s2))",
    "rc1(rc1(s2))",
)
POS_SLOTS = WORD_SLOTS
LABEL_SLOTS = WORD_SLOTS[3:]

N_WORD_SLOTS = len(WORD_SLOTS)
N_POS_SLOTS = len(POS_SLOTS)
N_LABEL_SLOTS = len(LABEL_SLOTS)


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-layout id slots; pos_ids/label_ids are None for the light system."""

    word_ids: tuple[int, ...]
    pos_ids: tuple[int, ...] | None = None
    label_ids: tuple[int, ...] | None = None


def _referents(state: State) -> list[StackItem | None]:
    stack = state.stack
    s = [stack[-i] if len(stack) >= i else None for i in (1, 2, 3)]
    out: list[StackItem | None] = list(s)
    for item in s[:2]:
        if item is None:
            out.extend((None, None, None, None))
        else:
            out.extend(
                (
                    item.left_child(1),
                    item.left_child(2),
                    item.right_child(1),
                    item.right_child(2),
                )
            )
    for item in s[:2]:
        lc1 = item.left_child(1) if item is not None else None
        rc1 = item.right_child(1) if item is not None else None
        out.append(lc1.left_child(1) if lc1 is not None else None)
        out.append(rc1.right_child(1) if rc1 is not None else None)
    return out


def extract(state: State, indexers: Indexers) -> FeatureVector:
    """Full 42-slot feature vector (15 word + 15 POS + 12 label ids)."""
    refs = _referents(state)
    words = tuple(
        indexers.word_id(r.root.form) if r is not None else indexers.null_word_id
        for r in refs
    )
    pos = tuple(
        indexers.pos_id(r.pos) if r is not None and r.pos is not None else indexers.null_pos_id
        for r in refs
    )
    labels = tuple(
        indexers.label_id(r.arc_label)
        if r is not None and r.arc_label is not None
        else indexers.null_label_id
        for r in refs[3:]
    )
    return FeatureVector(word_ids=words, pos_ids=pos, label_ids=labels)


def extract_light(state: State, indexers: Indexers) -> FeatureVector:
    """Word-only 15-slot feature vector."""
    refs = _referents(state)
    words = tuple(
        indexers.word_id(r.root.form) if r is not None else indexers.null_word_id
        for r in refs
    )
    return FeatureVector(word_ids=words)
