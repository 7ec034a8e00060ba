"""Feed-forward action scorer: embeddings, one tanh layer, feasible softmax.

The hidden layer is h = tanh(W1w xw + W1t xt + W1l xl [+ W1lm f] + b1) over
concatenated feature embeddings; action scores are W2 h with no output bias,
and the softmax is computed only over the rows of the actions that are legal
at the state, so illegal actions have no probability at all.  Training is
cross-entropy plus an L2 term over every trainable tensor, optimized with
Adagrad; dropout on the hidden layer is inverted so inference needs no
rescaling.  Everything is float64 numpy with hand-written gradients, checked
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synlin.corpus import (
    DepSentence,
    Indexers,
    UNK_WORD,
    derive_oracle,
    to_bag,
)
from synlin.errors import ConfigError, DataError, TrainingError
from synlin.features import (
    FeatureVector,
    N_LABEL_SLOTS,
    N_POS_SLOTS,
    N_WORD_SLOTS,
    extract,
    extract_light,
)
from synlin.optim import Adagrad
from synlin.transition import (
    END,
    FULL,
    LEFT_ARC,
    LIGHT,
    POS,
    RIGHT_ARC,
    SHIFT,
    Action,
    apply,
    initial_state,
    legal_actions,
)

ADAGRAD_EPSILON = 1e-8
INIT_SCALE = 0.01


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    l2_lambda: float = 1e-8
    dropout: float = 0.3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    embed_dim: int = 50
    hidden_dim: int = 200

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embedding and hidden dimensions must be positive")


class ActionInventory:
    """The global action set; row i of the output matrix scores action i.

    Shift rows cover the whole word vocabulary (including the unknown-word
    token, to which out-of-vocabulary shifts are mapped); the padding tokens
    have no rows.
    """

    def __init__(self, actions: tuple[Action, ...], unk_word: str = UNK_WORD):
        self.actions = actions
        self._rows = {a: i for i, a in enumerate(actions)}
        self._unk_shift = self._rows.get(Action(SHIFT, unk_word))

    @classmethod
    def from_indexers(cls, indexers: Indexers, variant: str) -> "ActionInventory":
        acts = [
            Action(SHIFT, w) for w in indexers.words if w != indexers.words[1]
        ]  # every vocabulary word except the padding token
        if variant == FULL:
            acts.extend(Action(POS, p) for p in indexers.content_pos_tags)
            acts.extend(Action(LEFT_ARC, l) for l in indexers.content_labels)
            acts.extend(Action(RIGHT_ARC, l) for l in indexers.content_labels)
        else:
            acts.append(Action(LEFT_ARC))
            acts.append(Action(RIGHT_ARC))
        acts.append(Action(END))
        return cls(tuple(acts))

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, action: Action) -> bool:
        return action in self._rows

    def row(self, action: Action) -> int:
        """Row index of an action; unknown shift forms map to the UNK row."""
        r = self._rows.get(action)
        if r is not None:
            return r
        if action.kind == SHIFT and self._unk_shift is not None:
            return self._unk_shift
        raise DataError(f"action {action.name()} not in the inventory")

    def action(self, row: int) -> Action:
        return self.actions[row]


@dataclass
class LinearizerParams:
    """Embedding matrices and network weights, all float64.

    Embeddings are stored one row per symbol; pos/label tensors are None in
    the light variant, and w1_lm is present only when the scorer takes the
    language model's top hidden vector as an extra input block.
    """

    emb_word: np.ndarray
    w1_word: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    emb_pos: np.ndarray | None = None
    emb_label: np.ndarray | None = None
    w1_pos: np.ndarray | None = None
    w1_label: np.ndarray | None = None
    w1_lm: np.ndarray | None = None

    _ORDER = (
        "emb_word",
        "emb_pos",
        "emb_label",
        "w1_word",
        "w1_pos",
        "w1_label",
        "w1_lm",
        "b1",
        "w2",
    )

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self._ORDER:
            t = getattr(self, name)
            if t is not None:
                out[name] = t
        return out


@dataclass
class Linearizer:
    """A trained (or initialized) scorer plus everything needed to use it."""

    params: LinearizerParams
    indexers: Indexers
    inventory: ActionInventory
    variant: str
    config: TrainConfig
    lm_feat_dim: int | None = None

    def extract_features(self, state) -> FeatureVector:
        if self.variant == FULL:
            return extract(state, self.indexers)
        return extract_light(state, self.indexers)


@dataclass
class TrainExample:
    """One oracle decision: features, the legal actions, the gold one."""

    features: FeatureVector
    feasible: tuple[Action, ...]
    gold: Action
    lm_feat: np.ndarray | None = None


def init_linearizer(
    indexers: Indexers,
    variant: str,
    config: TrainConfig,
    lm_feat_dim: int | None = None,
    rng: np.random.Generator | None = None,
) -> Linearizer:
    """Fresh parameters: uniform(-0.01, 0.01) everywhere except the zero b1."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    inventory = ActionInventory.from_indexers(indexers, variant)
    d, h = config.embed_dim, config.hidden_dim

    def u(*shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    params = LinearizerParams(
        emb_word=u(indexers.n_words, d),
        w1_word=u(h, N_WORD_SLOTS * d),
        b1=np.zeros(h),
        w2=u(len(inventory), h),
    )
    if variant == FULL:
        params.emb_pos = u(indexers.n_pos, d)
        params.emb_label = u(indexers.n_labels, d)
        params.w1_pos = u(h, N_POS_SLOTS * d)
        params.w1_label = u(h, N_LABEL_SLOTS * d)
    if lm_feat_dim is not None:
        params.w1_lm = u(h, lm_feat_dim)
    return Linearizer(
        params=params,
        indexers=indexers,
        inventory=inventory,
        variant=variant,
        config=config,
        lm_feat_dim=lm_feat_dim,
    )


def make_training_examples(
    sentences: list[DepSentence],
    model: Linearizer,
    lm=None,
) -> list[TrainExample]:
    """Replay the oracle over each sentence, recording one example per action.

    When `lm` is given (a trained LanguageModel), each example carries the
    LM's top hidden vector for the words shifted so far, and the LM advances
    whenever the oracle shifts; its parameters are never touched.
    """
    from synlin import lstm_lm  # local import: lstm_lm is independent of this module

    examples = []
    for k, sent in enumerate(sentences):
        actions = derive_oracle(sent, model.variant)
        state = initial_state(
            to_bag(sent),
            model.variant,
            model.indexers.content_pos_tags,
            model.indexers.content_labels,
        )
        lm_state = lstm_lm.start_state(lm) if lm is not None else None
        for act in actions:
            feasible = legal_actions(state)
            if act not in feasible:
                raise DataError(
                    f"sentence {k + 1}: gold action {act.name()} not feasible at "
                    f"{state.summary()}"
                )
            examples.append(
                TrainExample(
                    features=model.extract_features(state),
                    feasible=feasible,
                    gold=act,
                    lm_feat=None if lm_state is None else lm_state.top_h,
                )
            )
            state = apply(state, act)
            if lm is not None and act.kind == SHIFT:
                lm_state, _ = lstm_lm.lm_step(lm, lm_state, lm.word_id(act.arg))
    return examples


@dataclass
class _Packed:
    """Training examples as dense arrays (feasible sets padded + masked)."""

    word_ids: np.ndarray
    pos_ids: np.ndarray | None
    label_ids: np.ndarray | None
    lm_feats: np.ndarray | None
    rows: np.ndarray
    valid: np.ndarray
    gold_col: np.ndarray

    def __len__(self) -> int:
        return len(self.word_ids)


def _pack(model: Linearizer, examples: list[TrainExample]) -> _Packed:
    n = len(examples)
    full = model.variant == FULL
    width = max(len(e.feasible) for e in examples)
    word_ids = np.zeros((n, N_WORD_SLOTS), dtype=np.int64)
    pos_ids = np.zeros((n, N_POS_SLOTS), dtype=np.int64) if full else None
    label_ids = np.zeros((n, N_LABEL_SLOTS), dtype=np.int64) if full else None
    rows = np.zeros((n, width), dtype=np.int64)
    valid = np.zeros((n, width), dtype=bool)
    gold_col = np.zeros(n, dtype=np.int64)
    lm_feats = None
    if model.lm_feat_dim is not None:
        lm_feats = np.zeros((n, model.lm_feat_dim))
    for i, ex in enumerate(examples):
        word_ids[i] = ex.features.word_ids
        if full:
            pos_ids[i] = ex.features.pos_ids
            label_ids[i] = ex.features.label_ids
        m = len(ex.feasible)
        rows[i, :m] = [model.inventory.row(a) for a in ex.feasible]
        valid[i, :m] = True
        try:
            gold_col[i] = ex.feasible.index(ex.gold)
        except ValueError:
            raise DataError(
                f"example {i}: gold action {ex.gold.name()} not in its feasible set"
            ) from None
        if lm_feats is not None:
            if ex.lm_feat is None:
                raise ConfigError(f"example {i}: model expects an LM feature block")
            lm_feats[i] = ex.lm_feat
    return _Packed(word_ids, pos_ids, label_ids, lm_feats, rows, valid, gold_col)


def _batch_pass(
    model: Linearizer,
    packed: _Packed,
    idx: np.ndarray,
    l2_lambda: float,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    want_grads: bool = True,
):
    """Objective and (optionally) gradients for the examples at `idx`."""
    p = model.params
    b = len(idx)
    d = model.config.embed_dim
    xw = p.emb_word[packed.word_ids[idx]].reshape(b, -1)
    pre = xw @ p.w1_word.T
    if model.variant == FULL:
        xt = p.emb_pos[packed.pos_ids[idx]].reshape(b, -1)
        xl = p.emb_label[packed.label_ids[idx]].reshape(b, -1)
        pre = pre + xt @ p.w1_pos.T + xl @ p.w1_label.T
    if p.w1_lm is not None:
        lm = packed.lm_feats[idx]
        pre = pre + lm @ p.w1_lm.T
    pre = pre + p.b1
    a = np.tanh(pre)
    if dropout > 0.0:
        mask = (rng.random(a.shape) >= dropout) / (1.0 - dropout)
        h = a * mask
    else:
        mask = None
        h = a
    rows = packed.rows[idx]
    valid = packed.valid[idx]
    logits = np.einsum("bfh,bh->bf", p.w2[rows], h)
    logits[~valid] = -np.inf
    m = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - m)
    z = exp.sum(axis=1, keepdims=True)
    logz = (m + np.log(z)).ravel()
    gold_logits = logits[np.arange(b), packed.gold_col[idx]]
    ce = float(np.sum(logz - gold_logits))
    objective = ce
    if l2_lambda > 0.0:
        objective += 0.5 * l2_lambda * sum(
            float(np.sum(t * t)) for t in p.named_tensors().values()
        )
    if not want_grads:
        return objective, None

    grads = {name: np.zeros_like(t) for name, t in p.named_tensors().items()}
    dlogits = exp / z
    dlogits[np.arange(b), packed.gold_col[idx]] -= 1.0
    np.add.at(
        grads["w2"],
        rows.reshape(-1),
        (dlogits[:, :, None] * h[:, None, :]).reshape(-1, h.shape[1]),
    )
    dh = np.einsum("bfh,bf->bh", p.w2[rows], dlogits)
    da = dh * mask if mask is not None else dh
    dpre = da * (1.0 - a * a)
    grads["b1"] += dpre.sum(axis=0)
    grads["w1_word"] += dpre.T @ xw
    dxw = (dpre @ p.w1_word).reshape(b, N_WORD_SLOTS, d)
    np.add.at(grads["emb_word"], packed.word_ids[idx], dxw)
    if model.variant == FULL:
        grads["w1_pos"] += dpre.T @ xt
        grads["w1_label"] += dpre.T @ xl
        dxt = (dpre @ p.w1_pos).reshape(b, N_POS_SLOTS, d)
        dxl = (dpre @ p.w1_label).reshape(b, N_LABEL_SLOTS, d)
        np.add.at(grads["emb_pos"], packed.pos_ids[idx], dxt)
        np.add.at(grads["emb_label"], packed.label_ids[idx], dxl)
    if p.w1_lm is not None:
        grads["w1_lm"] += dpre.T @ lm
    if l2_lambda > 0.0:
        for name, t in p.named_tensors().items():
            grads[name] += l2_lambda * t
    return objective, grads


def forward(
    model: Linearizer,
    fv: FeatureVector,
    feasible: tuple[Action, ...],
    lm_feat: np.ndarray | None = None,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> dict[Action, float]:
    """Log-probabilities over the feasible actions (a map action -> logp)."""
    if not feasible:
        raise DataError("feasible set is empty")
    p = model.params
    x = p.emb_word[np.asarray(fv.word_ids)].ravel()
    pre = p.w1_word @ x
    if model.variant == FULL:
        pre = pre + p.w1_pos @ p.emb_pos[np.asarray(fv.pos_ids)].ravel()
        pre = pre + p.w1_label @ p.emb_label[np.asarray(fv.label_ids)].ravel()
    if p.w1_lm is not None:
        if lm_feat is None:
            raise ConfigError("model expects an LM feature block")
        if lm_feat.shape != (p.w1_lm.shape[1],):
            raise ConfigError(
                f"LM feature width {lm_feat.shape} != {p.w1_lm.shape[1]}"
            )
        pre = pre + p.w1_lm @ lm_feat
    elif lm_feat is not None:
        raise ConfigError("model has no LM feature block but one was supplied")
    h = np.tanh(pre + p.b1)
    if train_mode and model.config.dropout > 0.0:
        if rng is None:
            raise ConfigError("train_mode forward needs an rng for dropout")
        h = h * (rng.random(h.shape) >= model.config.dropout) / (1.0 - model.config.dropout)
    rows = [model.inventory.row(a) for a in feasible]
    logits = p.w2[rows] @ h
    m = logits.max()
    logp = logits - (m + np.log(np.sum(np.exp(logits - m))))
    return dict(zip(feasible, logp))


def loss(model: Linearizer, batch: list[TrainExample], l2_lambda: float | None = None) -> float:
    """Cross-entropy over the batch plus the L2 term over all tensors."""
    if l2_lambda is None:
        l2_lambda = model.config.l2_lambda
    packed = _pack(model, batch)
    objective, _ = _batch_pass(
        model, packed, np.arange(len(batch)), l2_lambda, want_grads=False
    )
    return objective


def train(
    model: Linearizer,
    examples: list[TrainExample],
    config: TrainConfig | None = None,
) -> list[float]:
    """Adagrad training over oracle examples; returns the per-epoch loss log.

    Deterministic under a fixed config seed.  The logged value per epoch is
    the sum of the per-batch objectives as seen during the pass (dropout
    included when configured).
    """
    if config is None:
        config = model.config
    if not examples:
        raise DataError("no training examples")
    rng = np.random.default_rng(config.seed)
    packed = _pack(model, examples)
    opt = Adagrad(model.params.named_tensors(), config.learning_rate, ADAGRAD_EPSILON)
    log = []
    n = len(examples)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            objective, grads = _batch_pass(
                model,
                packed,
                idx,
                config.l2_lambda,
                dropout=config.dropout,
                rng=rng,
                want_grads=True,
            )
            if not np.isfinite(objective):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, batch offset {start}: "
                    f"{objective!r}"
                )
            opt.step(grads)
            total += objective
        log.append(total)
    return log


def grad_check(
    model: Linearizer,
    batch: list[TrainExample],
    epsilon: float = 1e-5,
    samples_per_tensor: int = 120,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic gradients and central differences.

    Dropout is off; the error is relative for large gradients and absolute
    near zero (denominator max(1, |a|, |n|)).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    packed = _pack(model, batch)
    idx = np.arange(len(batch))
    l2 = model.config.l2_lambda
    _, grads = _batch_pass(model, packed, idx, l2, want_grads=True)

    def objective() -> float:
        val, _ = _batch_pass(model, packed, idx, l2, want_grads=False)
        return val

    worst = 0.0
    for name, tensor in model.params.named_tensors().items():
        flat = tensor.reshape(-1)
        size = flat.shape[0]
        if size <= samples_per_tensor:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=samples_per_tensor, replace=False)
        gflat = grads[name].reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            f_plus = objective()
            flat[c] = orig - epsilon
            f_minus = objective()
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            analytic = gflat[c]
            denom = max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
