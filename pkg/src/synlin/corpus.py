"""Dependency corpora: CoNLL reading, symbol tables, word bags, and oracles.

The interchange format is 8+ column CoNLL-X (id, form, lemma, cpos, pos,
feats, head, deprel), blank-line separated.  Sentences must be single-rooted
projective trees; anything else is rejected at ingestion because the
left-to-right adjacent-reduction system cannot derive it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from synlin.errors import (
    ConllError,
    DataError,
    DerivationError,
    NonProjectiveError,
    TreeError,
)
from synlin.transition import (
    END,
    FULL,
    LEFT_ARC,
    LIGHT,
    POS,
    RIGHT_ARC,
    SHIFT,
    VARIANTS,
    Action,
    State,
    TokenRef,
    apply,
    initial_state,
)

UNK_WORD = "<unk>"
NULL_WORD = "<null_w>"
NULL_POS = "<null_t>"
NULL_LABEL = "<null_l>"

# CoNLL convention for an absent column value; such POS tags / labels are
# excluded from the inventories.
MISSING = "_"


@dataclass(frozen=True)
class Token:
    """One token line: 1-based position, surface form, tag, head, arc label.

    head is 0 for the root token, otherwise the 1-based index of the parent.
    """

    index: int
    form: str
    pos: str
    head: int
    label: str


@dataclass(frozen=True)
class DepSentence:
    """A sentence whose heads form a single projective tree.

    Construction validates the tree; TreeError / NonProjectiveError are
    raised for anything the transition system cannot rebuild.
    """

    tokens: tuple[Token, ...]

    def __post_init__(self):
        _validate_tree(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def root_index(self) -> int:
        return next(t.index for t in self.tokens if t.head == 0)


def _validate_tree(tokens: tuple[Token, ...]):
    n = len(tokens)
    if n < 1:
        raise TreeError("sentence has no tokens")
    for i, t in enumerate(tokens, start=1):
        if t.index != i:
            raise TreeError(f"token indices not contiguous at position {i}")
        if not 0 <= t.head <= n:
            raise TreeError(f"token {i}: head {t.head} out of range")
        if t.head == t.index:
            raise TreeError(f"token {i} is its own head")
    roots = [t.index for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise TreeError(f"expected exactly one root, found {len(roots)}")
    heads = {t.index: t.head for t in tokens}
    # Cycle check: every node must reach the artificial root (0).
    for t in tokens:
        seen = set()
        node = t.index
        while node != 0:
            if node in seen:
                raise TreeError(f"cycle through token {t.index}")
            seen.add(node)
            node = heads[node]
    # Projectivity: every word between a head and its dependent must be a
    # descendant of that head.
    for t in tokens:
        if t.head == 0:
            continue
        lo, hi = sorted((t.index, t.head))
        for k in range(lo + 1, hi):
            node = k
            while node != 0 and node != t.head:
                node = heads[node]
            if node != t.head:
                raise NonProjectiveError(
                    f"arc {t.head}->{t.index} crosses token {k}"
                )


@dataclass(frozen=True)
class Indexers:
    """Dense symbol tables for words, POS tags, and arc labels.

    Word id 0 is the unknown-word token and id 1 the padding token for
    absent feature slots; POS and label tables reserve id 0 for padding.
    """

    words: tuple[str, ...]
    pos_tags: tuple[str, ...]
    labels: tuple[str, ...]
    counts: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_word_ids", {w: i for i, w in enumerate(self.words)})
        object.__setattr__(self, "_pos_ids", {p: i for i, p in enumerate(self.pos_tags)})
        object.__setattr__(self, "_label_ids", {l: i for i, l in enumerate(self.labels)})

    unk_id = 0
    null_word_id = 1
    null_pos_id = 0
    null_label_id = 0

    @property
    def n_words(self) -> int:
        return len(self.words)

    @property
    def n_pos(self) -> int:
        return len(self.pos_tags)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def content_pos_tags(self) -> tuple[str, ...]:
        """Real POS tags (padding excluded); the Pos action inventory."""
        return self.pos_tags[1:]

    @property
    def content_labels(self) -> tuple[str, ...]:
        """Real arc labels (padding excluded); the arc action inventory."""
        return self.labels[1:]

    def word_id(self, form: str) -> int:
        return self._word_ids.get(form, self.unk_id)

    def has_word(self, form: str) -> bool:
        return form in self._word_ids

    def pos_id(self, tag: str) -> int:
        try:
            return self._pos_ids[tag]
        except KeyError:
            raise DataError(f"POS tag {tag!r} not in the index") from None

    def label_id(self, label: str) -> int:
        try:
            return self._label_ids[label]
        except KeyError:
            raise DataError(f"arc label {label!r} not in the index") from None

    def word_of(self, idx: int) -> str:
        return self.words[idx]

    def pos_of(self, idx: int) -> str:
        return self.pos_tags[idx]

    def label_of(self, idx: int) -> str:
        return self.labels[idx]


def build_indexers(corpus: Iterable[DepSentence], min_count: int = 1) -> Indexers:
    """Symbol tables from a corpus; words rarer than `min_count` map to UNK.

    All POS tags and labels are retained (the root token's label and "_"
    placeholders excluded from the label inventory, "_" from the POS one).
    """
    if min_count < 1:
        raise DataError(f"min_count must be >= 1, got {min_count}")
    counts: Counter = Counter()
    pos_set: set[str] = set()
    label_set: set[str] = set()
    empty = True
    for sent in corpus:
        empty = False
        for t in sent.tokens:
            counts[t.form] += 1
            if t.pos != MISSING:
                pos_set.add(t.pos)
            if t.head != 0 and t.label != MISSING:
                label_set.add(t.label)
    if empty:
        raise DataError("cannot build indexers from an empty corpus")
    kept = [w for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda w: (-counts[w], w))
    return Indexers(
        words=(UNK_WORD, NULL_WORD, *kept),
        pos_tags=(NULL_POS, *sorted(pos_set)),
        labels=(NULL_LABEL, *sorted(label_set)),
        counts=dict(counts),
    )


@dataclass(frozen=True)
class WordBag:
    """An unordered multiset of input tokens.

    `token_ids` individuates duplicates and is kept in canonical
    (form, tid) order, so nothing downstream depends on surface order.
    """

    token_ids: tuple[TokenRef, ...]

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def entries(self) -> tuple[tuple[str, int], ...]:
        counts = Counter(t.form for t in self.token_ids)
        return tuple(sorted(counts.items()))

    def forms(self) -> list[str]:
        return [t.form for t in self.token_ids]


def to_bag(sentence: DepSentence) -> WordBag:
    """Strip the order from a sentence, keeping gold indices as token ids."""
    refs = sorted(
        (TokenRef(t.index, t.form) for t in sentence.tokens),
        key=lambda r: (r.form, r.tid),
    )
    return WordBag(token_ids=tuple(refs))


def bag_from_forms(forms: Iterable[str]) -> WordBag:
    """Bag from plain forms; ids number the forms in their given order."""
    refs = sorted(
        (TokenRef(i, f) for i, f in enumerate(forms, start=1)),
        key=lambda r: (r.form, r.tid),
    )
    if not refs:
        raise DataError("empty word bag")
    return WordBag(token_ids=tuple(refs))


def _blocks(lines: Iterable[str]) -> Iterator[list[tuple[int, str]]]:
    block: list[tuple[int, str]] = []
    for no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line.strip() == "":
            if block:
                yield block
                block = []
        elif line.lstrip().startswith("#"):
            continue
        else:
            block.append((no, line))
    if block:
        yield block


def _parse_block(block: list[tuple[int, str]]) -> DepSentence:
    tokens = []
    for position, (no, line) in enumerate(block, start=1):
        cols = line.split("\t") if "\t" in line else line.split()
        if len(cols) < 8:
            raise ConllError(f"line {no}: expected >= 8 columns, got {len(cols)}")
        try:
            idx = int(cols[0])
            head = int(cols[6])
        except ValueError as exc:
            raise ConllError(f"line {no}: non-integer id or head ({exc})") from None
        if idx != position:
            raise ConllError(f"line {no}: token id {idx}, expected {position}")
        tokens.append(Token(index=idx, form=cols[1], pos=cols[4], head=head, label=cols[7]))
    return DepSentence(tokens=tuple(tokens))


def parse_conll(text) -> list[DepSentence]:
    """Parse CoNLL text (a string or line iterable) into validated sentences.

    Raises ConllError for malformed lines and TreeError/NonProjectiveError
    (with the 1-based sentence index) for trees the system cannot rebuild.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    sentences = []
    for sent_no, block in enumerate(_blocks(lines), start=1):
        try:
            sentences.append(_parse_block(block))
        except (TreeError, NonProjectiveError) as exc:
            exc.args = (f"sentence {sent_no}: {exc}",)
            raise
    return sentences


def parse_conll_lenient(text) -> tuple[list[DepSentence], list[str]]:
    """Like parse_conll but skips sentences with invalid trees.

    Returns (sentences, skip messages).  Malformed lines still raise: they
    indicate file corruption, not data quality.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    sentences = []
    skipped = []
    for sent_no, block in enumerate(_blocks(lines), start=1):
        try:
            sentences.append(_parse_block(block))
        except ConllError:
            raise
        except (TreeError, NonProjectiveError) as exc:
            skipped.append(f"sentence {sent_no}: {exc}")
    return sentences, skipped


def parse_conll_forms(text) -> list[list[str]]:
    """Token forms per CoNLL block, without tree validation.

    Decode input only needs the words; tree quality is irrelevant there.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    out = []
    for block in _blocks(lines):
        forms = []
        for no, line in block:
            cols = line.split("\t") if "\t" in line else line.split()
            if len(cols) < 2:
                raise ConllError(f"line {no}: expected at least id and form columns")
            forms.append(cols[1])
        out.append(forms)
    return out


def to_conll(sentences: Iterable[DepSentence]) -> str:
    """Render sentences back to 8-column CoNLL text."""
    out = []
    for sent in sentences:
        for t in sent.tokens:
            out.append(
                f"{t.index}\t{t.form}\t_\t_\t{t.pos}\t_\t{t.head}\t{t.label}"
            )
        out.append("")
    return "\n".join(out) + "\n"


def gold_arcs(sentence: DepSentence, variant: str) -> frozenset:
    """The n-1 arcs among real tokens, labels dropped in the light variant."""
    return frozenset(
        (t.head, t.index, t.label if variant == FULL else None)
        for t in sentence.tokens
        if t.head != 0
    )


def derive_oracle(sentence: DepSentence, variant: str) -> list[Action]:
    """Action sequence that rebuilds the gold order and gold arc set.

    Arc-standard derivation: an arc fires only once the dependent has
    collected all of its own dependents; RArc is taken the moment it is
    valid (deferring it is never recoverable).  When LArc and Shift are both
    derivable -- the next gold word sits inside the prospective head's
    subtree -- Shift wins.  Full derivations are 3n actions, light 2n.
    """
    if variant not in VARIANTS:
        raise DataError(f"unknown variant {variant!r}")
    full = variant == FULL
    heads = {t.index: t.head for t in sentence.tokens}
    labels = {t.index: t.label for t in sentence.tokens}
    forms = {t.index: t.form for t in sentence.tokens}
    tags = {t.index: t.pos for t in sentence.tokens}
    n_children = Counter(heads.values())
    attached: Counter = Counter()
    n = len(sentence)

    def complete(i: int) -> bool:
        return attached[i] == n_children[i]

    def inside_subtree(node: int, ancestor: int) -> bool:
        node = heads[node]
        while node != 0:
            if node == ancestor:
                return True
            node = heads[node]
        return False

    actions: list[Action] = []
    stack: list[int] = []
    nxt = 1
    while True:
        if len(stack) >= 2:
            top, second = stack[-1], stack[-2]
            if heads[top] == second and complete(top):
                actions.append(Action(RIGHT_ARC, labels[top] if full else None))
                attached[second] += 1
                stack.pop()
                continue
            if heads[second] == top and complete(second):
                prefer_shift = nxt <= n and inside_subtree(nxt, top)
                if not prefer_shift:
                    actions.append(Action(LEFT_ARC, labels[second] if full else None))
                    attached[top] += 1
                    del stack[-2]
                    continue
        if nxt <= n:
            actions.append(Action(SHIFT, forms[nxt]))
            if full:
                actions.append(Action(POS, tags[nxt]))
            stack.append(nxt)
            nxt += 1
            continue
        break
    if len(stack) != 1:
        raise DerivationError(
            f"no arc-standard derivation (stack {stack}); tree is not projective"
        )
    actions.append(Action(END))
    expected = 3 * n if full else 2 * n
    assert len(actions) == expected, f"derivation length {len(actions)} != {expected}"
    return actions


def replay_oracle(sentence: DepSentence, variant: str, actions=None) -> State:
    """Apply the oracle actions through the transition system; terminal state.

    Inventories for legality checks are taken from the sentence itself.
    """
    if actions is None:
        actions = derive_oracle(sentence, variant)
    pos_tags = sorted({t.pos for t in sentence.tokens if t.pos != MISSING})
    arc_labels = sorted(
        {t.label for t in sentence.tokens if t.head != 0 and t.label != MISSING}
    )
    state = initial_state(to_bag(sentence), variant, pos_tags, arc_labels)
    for act in actions:
        state = apply(state, act)
    return state
