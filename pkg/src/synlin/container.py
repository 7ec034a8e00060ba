"""Single-file model persistence.

Layout: one canonical JSON header line (sorted keys, compact separators)
terminated by a newline, followed by the raw little-endian float64 payloads
of the tensors in exactly the order listed in the header.  The header also
carries the symbol tables, the config snapshot, and the feature slot layout,
so a saved model is self-describing; save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from synlin.corpus import Indexers
from synlin.errors import ModelFormatError
from synlin.features import LABEL_SLOTS, POS_SLOTS, WORD_SLOTS
from synlin.ffnn import (
    ActionInventory,
    Linearizer,
    LinearizerParams,
    TrainConfig,
)
from synlin.lstm_lm import LanguageModel, LmConfig, LmParams
from synlin.transition import FULL

FORMAT_VERSION = 1

COMPONENT_LINEARIZER = "linearizer"
COMPONENT_LM = "lm"
COMPONENT_COMBINED = "combined"


@dataclass
class ModelContainer:
    component: str
    config: dict
    indexers: dict  # section name -> indexer payload
    tensors: dict[str, np.ndarray]
    variant: str | None = None
    feature_slots: dict | None = None


def _indexers_payload(indexers: Indexers) -> dict:
    return {
        "words": list(indexers.words),
        "pos_tags": list(indexers.pos_tags),
        "labels": list(indexers.labels),
        "counts": {k: int(v) for k, v in sorted(indexers.counts.items())},
    }


def _indexers_from_payload(payload: dict) -> Indexers:
    return Indexers(
        words=tuple(payload["words"]),
        pos_tags=tuple(payload["pos_tags"]),
        labels=tuple(payload["labels"]),
        counts=dict(payload.get("counts", {})),
    )


def save(container: ModelContainer, path: str):
    names = sorted(container.tensors)
    header = {
        "format_version": FORMAT_VERSION,
        "component": container.component,
        "variant": container.variant,
        "config": container.config,
        "indexers": container.indexers,
        "feature_slots": container.feature_slots,
        "tensors": [[name, list(container.tensors[name].shape)] for name in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(blob)
        fh.write(b"\n")
        for name in names:
            fh.write(np.ascontiguousarray(container.tensors[name], dtype="<f8").tobytes())


def load(path: str) -> ModelContainer:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: bad container header ({exc})") from None
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise ModelFormatError(
                f"{path}: unsupported format version {version!r} (expected {FORMAT_VERSION})"
            )
        tensors = {}
        for name, shape in header["tensors"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ModelFormatError(f"{path}: truncated payload for tensor {name}")
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise ModelFormatError(f"{path}: trailing bytes after tensor payloads")
    return ModelContainer(
        component=header["component"],
        config=header["config"],
        indexers=header["indexers"],
        tensors=tensors,
        variant=header.get("variant"),
        feature_slots=header.get("feature_slots"),
    )


def _train_config_dict(config: TrainConfig) -> dict:
    return {
        "learning_rate": config.learning_rate,
        "l2_lambda": config.l2_lambda,
        "dropout": config.dropout,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "embed_dim": config.embed_dim,
        "hidden_dim": config.hidden_dim,
    }


def _lm_config_dict(config: LmConfig) -> dict:
    return {
        "num_layers": config.num_layers,
        "hidden_size": config.hidden_size,
        "dropout": config.dropout,
        "learning_rate": config.learning_rate,
        "l2_lambda": config.l2_lambda,
        "epochs": config.epochs,
        "seed": config.seed,
        "gate_bias": config.gate_bias,
    }


def _feature_slots(variant: str) -> dict:
    slots = {"word": list(WORD_SLOTS)}
    if variant == FULL:
        slots["pos"] = list(POS_SLOTS)
        slots["label"] = list(LABEL_SLOTS)
    return slots


def container_from_linearizer(model: Linearizer, lm: LanguageModel | None = None) -> ModelContainer:
    """Pack a linearizer (and, for feature-integrated models, its LM)."""
    tensors = {f"lin.{k}": v for k, v in model.params.named_tensors().items()}
    config = {"linearizer": _train_config_dict(model.config)}
    indexers = {"linearizer": _indexers_payload(model.indexers)}
    component = COMPONENT_LINEARIZER
    if model.lm_feat_dim is not None:
        if lm is None:
            raise ModelFormatError("feature-integrated model requires its language model")
        component = COMPONENT_COMBINED
        tensors.update({f"lm.{k}": v for k, v in lm.params.named_tensors().items()})
        config["lm"] = _lm_config_dict(lm.config)
        indexers["lm"] = _indexers_payload(lm.indexers)
    return ModelContainer(
        component=component,
        config=config,
        indexers=indexers,
        tensors=tensors,
        variant=model.variant,
        feature_slots=_feature_slots(model.variant),
    )


def container_from_lm(lm: LanguageModel) -> ModelContainer:
    return ModelContainer(
        component=COMPONENT_LM,
        config={"lm": _lm_config_dict(lm.config)},
        indexers={"lm": _indexers_payload(lm.indexers)},
        tensors={f"lm.{k}": v for k, v in lm.params.named_tensors().items()},
    )


def linearizer_from_container(container: ModelContainer) -> Linearizer:
    if container.component not in (COMPONENT_LINEARIZER, COMPONENT_COMBINED):
        raise ModelFormatError(
            f"container holds {container.component!r}, not a linearizer"
        )
    indexers = _indexers_from_payload(container.indexers["linearizer"])
    config = TrainConfig(**container.config["linearizer"])
    tensors = {
        k[len("lin.") :]: v for k, v in container.tensors.items() if k.startswith("lin.")
    }
    params = LinearizerParams(
        emb_word=tensors["emb_word"],
        w1_word=tensors["w1_word"],
        b1=tensors["b1"],
        w2=tensors["w2"],
        emb_pos=tensors.get("emb_pos"),
        emb_label=tensors.get("emb_label"),
        w1_pos=tensors.get("w1_pos"),
        w1_label=tensors.get("w1_label"),
        w1_lm=tensors.get("w1_lm"),
    )
    lm_feat_dim = params.w1_lm.shape[1] if params.w1_lm is not None else None
    inventory = ActionInventory.from_indexers(indexers, container.variant)
    if params.w2.shape[0] != len(inventory):
        raise ModelFormatError(
            f"output matrix rows {params.w2.shape[0]} != inventory size {len(inventory)}"
        )
    return Linearizer(
        params=params,
        indexers=indexers,
        inventory=inventory,
        variant=container.variant,
        config=config,
        lm_feat_dim=lm_feat_dim,
    )


def lm_from_container(container: ModelContainer) -> LanguageModel:
    if container.component not in (COMPONENT_LM, COMPONENT_COMBINED):
        raise ModelFormatError(
            f"container holds {container.component!r}, not a language model"
        )
    indexers = _indexers_from_payload(container.indexers["lm"])
    config = LmConfig(**container.config["lm"])
    tensors = {
        k[len("lm.") :]: v for k, v in container.tensors.items() if k.startswith("lm.")
    }
    cells = tuple(tensors[f"cell{i}"] for i in range(config.num_layers))
    biases = None
    if config.gate_bias:
        biases = tuple(tensors[f"cell{i}_bias"] for i in range(config.num_layers))
    params = LmParams(
        emb=tensors["emb"], cells=cells, out_emb=tensors["out_emb"], cell_biases=biases
    )
    return LanguageModel(params=params, indexers=indexers, config=config)
