"""Greedy, beam, and exhaustive decoding over derivations.

Four scoring modes:

  syn       action log-probabilities from the feed-forward scorer alone;
  lstm      bag-restricted LSTM next-word log-probabilities; derivations are
            the n shift choices, no tree is built;
  syn+lstm  joint decoding: scorer log-prob plus alpha times the LM log-prob
            of the shifted word; non-shift actions get an LM factor of 1.0,
            i.e. exactly zero contribution, and the combined distribution is
            not renormalized (a config switch turns renormalization on);
  synxlstm  feature-level integration: the scorer itself consumes the LM's
            top hidden vector, so no interpolation weight exists.

The beam is breadth-synchronous: every hypothesis at step t has taken t
actions, and derivations have a fixed length (3n, 2n or n), so all
surviving items finish together.  The LSTM state advances only on Shift.
Ties in accumulated score break deterministically on the lexicographic
history of (action kind, argument) keys.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synlin.corpus import WordBag
from synlin.errors import ConfigError, DataError, SearchSpaceError
from synlin.ffnn import Linearizer, forward
from synlin.lstm_lm import LanguageModel, LmState, lm_step, next_word_logprobs, start_state
from synlin.transition import (
    FULL,
    LIGHT,
    SHIFT,
    Action,
    State,
    apply,
    initial_state,
    legal_actions,
    realized_sentence,
)

MODE_SYN = "syn"
MODE_LSTM = "lstm"
MODE_JOINT = "syn+lstm"
MODE_FEATURE = "synxlstm"
MODES = (MODE_SYN, MODE_LSTM, MODE_JOINT, MODE_FEATURE)

# Hard input-size bounds for full enumeration.
EXHAUSTIVE_MAX_TREE = 6
EXHAUSTIVE_MAX_LSTM = 8


@dataclass
class DecodeConfig:
    mode: str = MODE_SYN
    variant: str | None = None
    beam_size: int = 1
    alpha: float = 0.4
    renormalize_joint: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {self.beam_size}")


@dataclass
class Models:
    linearizer: Linearizer | None = None
    lm: LanguageModel | None = None


@dataclass
class BeamItem:
    state: State
    score: float
    lm_state: LmState | None
    tie_key: tuple


@dataclass
class DecodeResult:
    tokens: tuple[str, ...]
    tids: tuple[int, ...]
    arcs: frozenset | None
    actions: tuple[Action, ...]
    score: float


def _validate(models: Models, config: DecodeConfig) -> str:
    """Check the mode/model combination; returns the working variant."""
    lin, lm = models.linearizer, models.lm
    if config.mode == MODE_LSTM:
        if lm is None:
            raise ConfigError("lstm mode needs a language model")
        return LIGHT
    if lin is None:
        raise ConfigError(f"{config.mode} mode needs a linearizer model")
    if config.variant is not None and config.variant != lin.variant:
        raise ConfigError(
            f"configured variant {config.variant!r} != model variant {lin.variant!r}"
        )
    if config.mode == MODE_FEATURE:
        if lin.lm_feat_dim is None:
            raise ConfigError("synxlstm mode needs a linearizer trained with LM features")
        if lm is None:
            raise ConfigError("synxlstm mode needs the language model")
        if lin.lm_feat_dim != lm.config.hidden_size:
            raise ConfigError(
                f"LM feature width mismatch: model expects {lin.lm_feat_dim}, "
                f"LM provides {lm.config.hidden_size}"
            )
    else:
        if lin.lm_feat_dim is not None:
            raise ConfigError(
                f"{config.mode} mode cannot drive a linearizer trained with LM features"
            )
        if config.mode == MODE_JOINT and lm is None:
            raise ConfigError("syn+lstm mode needs a language model")
    return lin.variant


def step_scores(item: BeamItem, models: Models, config: DecodeConfig) -> dict[Action, float]:
    """Per-action log-score increments at this item, mode-dependent."""
    state = item.state
    if config.mode == MODE_LSTM:
        forms = state.remaining_forms()
        if not forms:
            raise DataError("lstm mode step on an exhausted bag")
        ids = [models.lm.word_id(f) for f in forms]
        logp = next_word_logprobs(models.lm, item.lm_state, ids)
        return {Action(SHIFT, f): float(v) for f, v in zip(forms, logp)}
    feasible = legal_actions(state)
    if not feasible:
        raise DataError(f"no legal actions at {state.summary()}")
    lin = models.linearizer
    lm_feat = item.lm_state.top_h if config.mode == MODE_FEATURE else None
    base = forward(lin, lin.extract_features(state), feasible, lm_feat=lm_feat)
    if config.mode != MODE_JOINT:
        return {a: float(v) for a, v in base.items()}
    shift_forms = [a.arg for a in feasible if a.kind == SHIFT]
    lm_lp: dict[str, float] = {}
    if shift_forms:
        ids = [models.lm.word_id(f) for f in shift_forms]
        arr = next_word_logprobs(models.lm, item.lm_state, ids)
        lm_lp = {f: float(v) for f, v in zip(shift_forms, arr)}
    combined = {
        a: float(v) + (config.alpha * lm_lp[a.arg] if a.kind == SHIFT else 0.0)
        for a, v in base.items()
    }
    if config.renormalize_joint:
        vals = np.array(list(combined.values()))
        m = vals.max()
        logz = m + np.log(np.sum(np.exp(vals - m)))
        combined = {a: v - float(logz) for a, v in combined.items()}
    return combined


def _advance(
    item: BeamItem, action: Action, score: float, key: tuple, models: Models
) -> BeamItem:
    lm_state = item.lm_state
    if lm_state is not None and action.kind == SHIFT:
        lm_state, _ = lm_step(models.lm, lm_state, models.lm.word_id(action.arg))
    return BeamItem(apply(item.state, action), score, lm_state, key)


def _is_terminal(item: BeamItem, mode: str) -> bool:
    if mode == MODE_LSTM:
        return not item.state.remaining
    return item.state.terminal


def _result(item: BeamItem, mode: str) -> DecodeResult:
    if mode == MODE_LSTM:
        refs = tuple(it.root for it in item.state.stack)
        arcs = None
    else:
        refs = realized_sentence(item.state)
        arcs = item.state.arcs
    return DecodeResult(
        tokens=tuple(r.form for r in refs),
        tids=tuple(r.tid for r in refs),
        arcs=arcs,
        actions=item.state.history,
        score=item.score,
    )


def _root_item(bag: WordBag, models: Models, config: DecodeConfig, variant: str) -> BeamItem:
    lin = models.linearizer
    if config.mode == MODE_LSTM:
        state = initial_state(bag, LIGHT)
    else:
        state = initial_state(
            bag, variant, lin.indexers.content_pos_tags, lin.indexers.content_labels
        )
    lm_state = start_state(models.lm) if config.mode != MODE_SYN else None
    return BeamItem(state, 0.0, lm_state, ())


def _n_steps(mode: str, variant: str, n: int) -> int:
    if mode == MODE_LSTM:
        return n
    return 3 * n if variant == FULL else 2 * n


def beam_decode(bag: WordBag, models: Models, config: DecodeConfig) -> DecodeResult:
    """Best derivation under a breadth-synchronous beam of `beam_size`."""
    variant = _validate(models, config)
    n = len(bag)
    if n == 0:
        raise DataError("cannot decode an empty bag")
    items = [_root_item(bag, models, config, variant)]
    for _ in range(_n_steps(config.mode, variant, n)):
        candidates = []
        for item in items:
            for action, s in step_scores(item, models, config).items():
                candidates.append(
                    (item.score + s, item.tie_key + (action.sort_key(),), item, action)
                )
        candidates.sort(key=lambda c: (-c[0], c[1]))
        items = [
            _advance(item, action, score, key, models)
            for score, key, item, action in candidates[: config.beam_size]
        ]
    best = items[0]
    assert _is_terminal(best, config.mode)
    return _result(best, config.mode)


def exhaustive_decode(bag: WordBag, models: Models, config: DecodeConfig) -> DecodeResult:
    """Global argmax by enumerating every legal derivation (testing oracle).

    Scores accumulate exactly as in beam_decode, ties break the same way.
    Refuses bags larger than the hard bounds.
    """
    variant = _validate(models, config)
    n = len(bag)
    bound = EXHAUSTIVE_MAX_LSTM if config.mode == MODE_LSTM else EXHAUSTIVE_MAX_TREE
    if n > bound:
        raise SearchSpaceError(
            f"exhaustive enumeration limited to {bound} tokens in {config.mode} mode, got {n}"
        )
    if n == 0:
        raise DataError("cannot decode an empty bag")
    best: BeamItem | None = None

    def walk(item: BeamItem):
        nonlocal best
        if _is_terminal(item, config.mode):
            if best is None or (-item.score, item.tie_key) < (-best.score, best.tie_key):
                best = item
            return
        for action, s in step_scores(item, models, config).items():
            walk(
                _advance(
                    item, action, item.score + s, item.tie_key + (action.sort_key(),), models
                )
            )

    walk(_root_item(bag, models, config, variant))
    return _result(best, config.mode)


def count_derivations(
    bag: WordBag,
    mode: str,
    variant: str = LIGHT,
    pos_tags=(),
    arc_labels=(),
) -> int:
    """Number of legal derivations for a bag (no models, structure only)."""
    n = len(bag)
    bound = EXHAUSTIVE_MAX_LSTM if mode == MODE_LSTM else EXHAUSTIVE_MAX_TREE
    if n > bound:
        raise SearchSpaceError(f"enumeration limited to {bound} tokens, got {n}")
    state = initial_state(bag, LIGHT if mode == MODE_LSTM else variant, pos_tags, arc_labels)

    def walk(st: State) -> int:
        if mode == MODE_LSTM:
            if not st.remaining:
                return 1
            return sum(walk(apply(st, Action(SHIFT, f))) for f in st.remaining_forms())
        if st.terminal:
            return 1
        return sum(walk(apply(st, a)) for a in legal_actions(st))

    return walk(state)
