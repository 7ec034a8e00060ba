"""Multi-layer LSTM language model, written out in numpy.

Each layer is a single weight block of shape (4n, 2n) acting on the
concatenation of the input from below and the layer's previous output;
the four gate slices are (input, forget, output, candidate) with sigmoid,
sigmoid, sigmoid, tanh activations:

    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

There are no gate biases by default (a config switch adds them), and the
word embedding width equals the layer width so the first layer typechecks.
Next-word probabilities are a softmax of output-embedding dot products with
the top layer's output, optionally restricted to an allowed word set; at
decode time the allowed set is the remaining input bag.  Training is
plain next-word cross entropy over gold-order sentences with a start symbol
prepended and an end symbol as the final target, backpropagated through the
full sentence and optimized with Adagrad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synlin.corpus import DepSentence, Indexers
from synlin.errors import ConfigError, DataError, TrainingError
from synlin.optim import Adagrad

START_SYMBOL = "<s>"
EOS_SYMBOL = "</s>"
LM_INIT_SCALE = 0.1
ADAGRAD_EPSILON = 1e-8


@dataclass
class LmConfig:
    num_layers: int = 2
    hidden_size: int = 128
    dropout: float = 0.5
    learning_rate: float = 0.1
    l2_lambda: float = 0.0
    epochs: int = 10
    seed: int = 0
    gate_bias: bool = False

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.num_layers < 1 or self.hidden_size < 1:
            raise ConfigError("num_layers and hidden_size must be positive")


@dataclass
class LmParams:
    """Input embeddings, one (4n, 2n) block per layer, output embeddings."""

    emb: np.ndarray
    cells: tuple[np.ndarray, ...]
    out_emb: np.ndarray
    cell_biases: tuple[np.ndarray, ...] | None = None

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {"emb": self.emb}
        for i, w in enumerate(self.cells):
            out[f"cell{i}"] = w
        if self.cell_biases is not None:
            for i, b in enumerate(self.cell_biases):
                out[f"cell{i}_bias"] = b
        out["out_emb"] = self.out_emb
        return out


@dataclass(frozen=True)
class LmState:
    """Per-layer (h, c) pairs for a consumed prefix.  Never mutated in place."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    consumed: int = 0

    @property
    def top_h(self) -> np.ndarray:
        return self.layers[-1][0]


@dataclass
class LanguageModel:
    params: LmParams
    indexers: Indexers
    config: LmConfig

    @property
    def vocab_size(self) -> int:
        """Word vocabulary plus the start and end symbols."""
        return self.indexers.n_words + 2

    @property
    def start_id(self) -> int:
        return self.indexers.n_words

    @property
    def eos_id(self) -> int:
        return self.indexers.n_words + 1

    def word_id(self, form: str) -> int:
        return self.indexers.word_id(form)


def init_lm(indexers: Indexers, config: LmConfig, rng: np.random.Generator | None = None) -> LanguageModel:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.hidden_size
    vocab = indexers.n_words + 2

    def u(*shape):
        return rng.uniform(-LM_INIT_SCALE, LM_INIT_SCALE, size=shape)

    params = LmParams(
        emb=u(vocab, n),
        cells=tuple(u(4 * n, 2 * n) for _ in range(config.num_layers)),
        out_emb=u(vocab, n),
        cell_biases=tuple(np.zeros(4 * n) for _ in range(config.num_layers))
        if config.gate_bias
        else None,
    )
    return LanguageModel(params=params, indexers=indexers, config=config)


def lstm_cell(
    weights: np.ndarray,
    h_below: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    bias: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One cell update; returns (h, c)."""
    n = h_prev.shape[0]
    if weights.shape != (4 * n, 2 * n) or h_below.shape != (n,):
        raise ConfigError(
            f"cell shapes inconsistent: W{weights.shape}, below {h_below.shape}, width {n}"
        )
    z = weights @ np.concatenate([h_below, h_prev])
    if bias is not None:
        z = z + bias
    i = _sigmoid(z[:n])
    f = _sigmoid(z[n : 2 * n])
    o = _sigmoid(z[2 * n : 3 * n])
    g = np.tanh(z[3 * n :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def initial_lm_state(model: LanguageModel) -> LmState:
    n = model.config.hidden_size
    zero = np.zeros(n)
    return LmState(
        layers=tuple((zero.copy(), zero.copy()) for _ in range(model.config.num_layers)),
        consumed=0,
    )


def lm_step(model: LanguageModel, state: LmState, word_id: int) -> tuple[LmState, np.ndarray]:
    """Feed one word; returns the new state and the top layer's output."""
    p = model.params
    below = p.emb[word_id]
    new_layers = []
    for layer, (h_prev, c_prev) in enumerate(state.layers):
        bias = p.cell_biases[layer] if p.cell_biases is not None else None
        h, c = lstm_cell(p.cells[layer], below, h_prev, c_prev, bias)
        new_layers.append((h, c))
        below = h
    return LmState(layers=tuple(new_layers), consumed=state.consumed + 1), below


def start_state(model: LanguageModel) -> LmState:
    """State after consuming the start symbol; the decode-time origin."""
    state, _ = lm_step(model, initial_lm_state(model), model.start_id)
    return state


def next_word_logprobs(model: LanguageModel, state: LmState, ids) -> np.ndarray:
    """Log-probabilities normalized over the given id sequence (order kept).

    Duplicate ids each count as an outcome, which is what decoding over
    distinct surface forms wants when several map to the unknown word.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise DataError("empty allowed set")
    logits = model.params.out_emb[ids] @ state.top_h
    m = logits.max()
    return logits - (m + np.log(np.sum(np.exp(logits - m))))


def next_word_distribution(
    model: LanguageModel, state: LmState, allowed=None
) -> dict[int, float]:
    """Probability map over allowed word ids (all of them when None)."""
    if allowed is None:
        ids = np.arange(model.vocab_size)
    else:
        ids = np.asarray(sorted(set(int(i) for i in allowed)), dtype=np.int64)
        if ids.size == 0:
            raise DataError("empty allowed set")
    logp = next_word_logprobs(model, state, ids)
    return {int(i): float(np.exp(lp)) for i, lp in zip(ids, logp)}


def sentence_ids(model: LanguageModel, forms) -> tuple[list[int], list[int]]:
    """(inputs, targets): start + words predict words + end."""
    word_ids = [model.word_id(f) for f in forms]
    return [model.start_id] + word_ids, word_ids + [model.eos_id]


def _forward_sentence(model, inputs, targets, dropout=0.0, rng=None):
    """Run one sentence, returning (cross_entropy, caches for backprop)."""
    p = model.params
    n = model.config.hidden_size
    n_layers = model.config.num_layers
    h_prev = [np.zeros(n) for _ in range(n_layers)]
    c_prev = [np.zeros(n) for _ in range(n_layers)]
    caches = []
    ce = 0.0
    for wid, target in zip(inputs, targets):
        below = p.emb[wid]
        step = {"wid": wid, "target": target, "layers": []}
        for layer in range(n_layers):
            w = p.cells[layer]
            bias = p.cell_biases[layer] if p.cell_biases is not None else None
            u = np.concatenate([below, h_prev[layer]])
            z = w @ u
            if bias is not None:
                z = z + bias
            i = _sigmoid(z[:n])
            f = _sigmoid(z[n : 2 * n])
            o = _sigmoid(z[2 * n : 3 * n])
            g = np.tanh(z[3 * n :])
            c = f * c_prev[layer] + i * g
            tc = np.tanh(c)
            h = o * tc
            if dropout > 0.0:
                mask = (rng.random(n) >= dropout) / (1.0 - dropout)
            else:
                mask = None
            dropped = h * mask if mask is not None else h
            step["layers"].append(
                {
                    "u": u,
                    "i": i,
                    "f": f,
                    "o": o,
                    "g": g,
                    "c_prev": c_prev[layer].copy(),
                    "c": c,
                    "tc": tc,
                    "mask": mask,
                }
            )
            h_prev[layer] = h
            c_prev[layer] = c
            below = dropped
        logits = p.out_emb @ below
        m = logits.max()
        logz = m + np.log(np.sum(np.exp(logits - m)))
        step["probs"] = np.exp(logits - logz)
        step["top_dropped"] = below
        ce += float(logz - logits[target])
        caches.append(step)
    return ce, caches


def _backward_sentence(model, caches):
    """Gradients of the sentence cross-entropy from forward caches."""
    p = model.params
    n = model.config.hidden_size
    n_layers = model.config.num_layers
    grads = {name: np.zeros_like(t) for name, t in p.named_tensors().items()}
    dh_next = [np.zeros(n) for _ in range(n_layers)]
    dc_next = [np.zeros(n) for _ in range(n_layers)]
    for step in reversed(caches):
        dlogits = step["probs"].copy()
        dlogits[step["target"]] -= 1.0
        grads["out_emb"] += np.outer(dlogits, step["top_dropped"])
        d_from_above = p.out_emb.T @ dlogits
        for layer in range(n_layers - 1, -1, -1):
            cache = step["layers"][layer]
            if cache["mask"] is not None:
                d_from_above = d_from_above * cache["mask"]
            dh = d_from_above + dh_next[layer]
            dc = dh * cache["o"] * (1.0 - cache["tc"] ** 2) + dc_next[layer]
            do = dh * cache["tc"]
            df = dc * cache["c_prev"]
            di = dc * cache["g"]
            dg = dc * cache["i"]
            dz = np.concatenate(
                [
                    di * cache["i"] * (1.0 - cache["i"]),
                    df * cache["f"] * (1.0 - cache["f"]),
                    do * cache["o"] * (1.0 - cache["o"]),
                    dg * (1.0 - cache["g"] ** 2),
                ]
            )
            grads[f"cell{layer}"] += np.outer(dz, cache["u"])
            if p.cell_biases is not None:
                grads[f"cell{layer}_bias"] += dz
            du = p.cells[layer].T @ dz
            d_from_above = du[:n]
            dh_next[layer] = du[n:]
            dc_next[layer] = dc * cache["f"]
        grads["emb"][step["wid"]] += d_from_above
    return grads


def train_lm(
    model: LanguageModel,
    sentences: list[DepSentence],
    config: LmConfig | None = None,
) -> list[float]:
    """Train in place; returns per-epoch training perplexities.

    One Adagrad update per sentence, the gradient backpropagated through the
    whole sentence.  Perplexity is computed from the losses observed during
    the epoch's pass.
    """
    if config is None:
        config = model.config
    if not sentences:
        raise DataError("no training sentences")
    rng = np.random.default_rng(config.seed)
    data = [sentence_ids(model, s.forms()) for s in sentences]
    opt = Adagrad(model.params.named_tensors(), config.learning_rate, ADAGRAD_EPSILON)
    log = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total_ce = 0.0
        total_targets = 0
        for k in order:
            inputs, targets = data[k]
            ce, caches = _forward_sentence(
                model, inputs, targets, dropout=config.dropout, rng=rng
            )
            if not np.isfinite(ce):
                raise TrainingError(f"non-finite LM loss at epoch {epoch + 1}")
            grads = _backward_sentence(model, caches)
            if config.l2_lambda > 0.0:
                for name, t in model.params.named_tensors().items():
                    grads[name] += config.l2_lambda * t
            opt.step(grads)
            total_ce += ce
            total_targets += len(targets)
        log.append(float(np.exp(total_ce / total_targets)))
    return log


def lm_grad_check(
    model: LanguageModel,
    sentences: list[DepSentence],
    epsilon: float = 1e-5,
    samples_per_tensor: int = 120,
    rng: np.random.Generator | None = None,
) -> float:
    """Analytic BPTT gradients vs central differences; max relative error."""
    if rng is None:
        rng = np.random.default_rng(0)
    data = [sentence_ids(model, s.forms()) for s in sentences]

    def total_loss() -> float:
        return sum(
            _forward_sentence(model, inp, tgt)[0] for inp, tgt in data
        )

    analytic = {name: np.zeros_like(t) for name, t in model.params.named_tensors().items()}
    for inputs, targets in data:
        _, caches = _forward_sentence(model, inputs, targets)
        for name, g in _backward_sentence(model, caches).items():
            analytic[name] += g
    worst = 0.0
    for name, tensor in model.params.named_tensors().items():
        flat = tensor.reshape(-1)
        size = flat.shape[0]
        if size <= samples_per_tensor:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=samples_per_tensor, replace=False)
        gflat = analytic[name].reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            f_plus = total_loss()
            flat[c] = orig - epsilon
            f_minus = total_loss()
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            denom = max(1.0, abs(gflat[c]), abs(numeric))
            worst = max(worst, abs(gflat[c] - numeric) / denom)
    return worst
