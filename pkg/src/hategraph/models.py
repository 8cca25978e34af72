"""Model container shared by the three model kinds, plus checkpoint I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from types import ModuleType
from typing import Union

import numpy as np

from . import comment_only, gat, graphormer
from .comment_only import CommentOnlyConfig
from .common import GraphInputs, OrdinalPrediction
from .discussion import DiscussionGraph
from .encoder import EncoderSpec, encode_graph
from .gat import GatConfig
from .graphormer import GraphormerConfig
from .layers import check_finite, softmax

FORMAT_VERSION = 1

ModelConfig = Union[GraphormerConfig, GatConfig, CommentOnlyConfig]

KINDS: dict[str, ModuleType] = {
    graphormer.KIND: graphormer,
    gat.KIND: gat,
    comment_only.KIND: comment_only,
}
CONFIG_TYPES = {
    graphormer.KIND: GraphormerConfig,
    gat.KIND: GatConfig,
    comment_only.KIND: CommentOnlyConfig,
}


class CheckpointError(ValueError):
    pass


def default_config(kind: str, input_dim: int) -> ModelConfig:
    if kind not in CONFIG_TYPES:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}")
    return CONFIG_TYPES[kind](input_dim=input_dim)


@dataclass
class Model:
    kind: str
    config: ModelConfig
    params: dict[str, np.ndarray]
    encoder: EncoderSpec

    @classmethod
    def initialize(
        cls,
        kind: str,
        config: ModelConfig,
        encoder: EncoderSpec,
        rng: np.random.Generator,
        init_scale: float = 1.0,
    ) -> "Model":
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        if not isinstance(config, CONFIG_TYPES[kind]):
            raise TypeError(f"{kind} needs a {CONFIG_TYPES[kind].__name__}")
        if encoder.dim != config.input_dim:
            raise ValueError(
                f"encoder width {encoder.dim} != model input_dim {config.input_dim}"
            )
        return cls(kind, config, KINDS[kind].init_params(config, rng, init_scale), encoder)

    @property
    def module(self) -> ModuleType:
        return KINDS[self.kind]

    def copy(self) -> "Model":
        return Model(self.kind, self.config, {k: v.copy() for k, v in self.params.items()}, self.encoder)

    def forward(self, inputs: GraphInputs, keep_cache: bool = True):
        return self.module.forward(self.params, self.config, inputs, keep_cache)

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        return self.module.backward(self.params, self.config, cache, dlogits)

    def inputs_for(self, g: DiscussionGraph) -> GraphInputs:
        return GraphInputs.from_graph(g, encode_graph(g, self.encoder))

    def predict_inputs(self, inputs: GraphInputs) -> OrdinalPrediction:
        logits, cache = self.forward(inputs, keep_cache=self.kind == comment_only.KIND)
        if self.kind == comment_only.KIND:
            # labels come from the bin rule on the raw score
            return OrdinalPrediction(logits, softmax(logits), comment_only.map_to_bins(cache[2]))
        return OrdinalPrediction.from_logits(logits)

    def predict_graph(self, g: DiscussionGraph) -> OrdinalPrediction:
        return self.predict_inputs(self.inputs_for(g))

    # -- checkpoints -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": self.kind,
            "encoder_spec": self.encoder.to_dict(),
            "config": self.config.to_dict(),
            "tensors": {
                name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                for name, arr in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format_version {d.get('format_version')!r}")
        kind = d.get("model_kind")
        if kind not in KINDS:
            raise CheckpointError(f"unknown model_kind {kind!r}")
        try:
            encoder = EncoderSpec.from_dict(d["encoder_spec"])
            config = CONFIG_TYPES[kind].from_dict(d["config"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"bad checkpoint header: {exc}") from None
        if encoder.dim != config.input_dim:
            raise CheckpointError(
                f"encoder width {encoder.dim} does not match config input_dim {config.input_dim}"
            )
        expected = KINDS[kind].param_shapes(config)
        tensors = d.get("tensors", {})
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise CheckpointError(f"tensor names mismatch; missing {missing}, unexpected {extra}")
        params = {}
        for name, shape in expected.items():
            t = tensors[name]
            if tuple(t["shape"]) != tuple(shape):
                raise CheckpointError(f"tensor {name!r} has shape {t['shape']}, expected {list(shape)}")
            arr = np.asarray(t["data"], dtype=np.float64)
            if arr.size != int(np.prod(shape)):
                raise CheckpointError(f"tensor {name!r} holds {arr.size} values for shape {list(shape)}")
            params[name] = arr.reshape(shape)
        try:
            check_finite(params)
        except FloatingPointError as exc:
            raise CheckpointError(str(exc)) from None
        return cls(kind, config, params, encoder)


def save_checkpoint(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()), encoding="utf-8")


def load_checkpoint(path) -> Model:
    return Model.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
