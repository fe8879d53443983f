"""Residual conv stem -> Transformer encoder -> BiLSTM -> per-frame heads."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ..clients import FeatureSequence
from ..errors import ShapeError, ValidationError


@dataclass(frozen=True)
class ModelConfig:
    res_blocks: int = 8
    in_planes: int = 768
    planes: int = 512
    embed_dim: int = 128
    kernel: int = 1
    stride: int = 1
    layers: int = 2
    heads: int = 4
    d_model: int = 128
    ff: int = 1024
    dropout: float = 0.5
    rnn_hidden: int = 64
    head_hidden: int = 256
    dia_out: int = 5
    det_out: int = 1
    # ablation switches
    use_resnet: bool = True
    use_transformer: bool = True
    use_rnn: bool = True
    multitask: bool = True
    # residual path from the frame embedding around the sequence encoders
    skip: bool = True

    def __post_init__(self):
        if self.embed_dim != self.d_model:
            raise ValidationError("embed_dim must equal d_model", field="embed_dim")
        if 2 * self.rnn_hidden != self.d_model:
            raise ValidationError("bidirectional rnn width must equal d_model", field="rnn_hidden")
        if self.stride != 1 or self.kernel % 2 != 1:
            raise ValidationError("only stride 1 and odd kernels preserve frame count", "kernel")
        if self.d_model % self.heads:
            raise ValidationError("d_model must be divisible by heads", field="heads")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


class ChannelNorm(nn.Module):
    """LayerNorm over channels of a (B, C, T) tensor; frame-local, so padding cannot leak."""

    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.LayerNorm(channels)

    def forward(self, x):
        return self.norm(x.transpose(1, 2)).transpose(1, 2)


class ResBlock(nn.Module):
    def __init__(self, planes: int, kernel: int):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv1d(planes, planes, kernel, padding=pad)
        self.norm1 = ChannelNorm(planes)
        self.conv2 = nn.Conv1d(planes, planes, kernel, padding=pad)
        self.norm2 = ChannelNorm(planes)

    def forward(self, x, mask):
        h = torch.relu(self.norm1(self.conv1(x))) * mask
        h = self.norm2(self.conv2(h))
        return torch.relu(x + h) * mask


class PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int = 20000):
        super().__init__()
        pos = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model)
        pe[:, 0::2] = torch.sin(pos * div)
        pe[:, 1::2] = torch.cos(pos * div)
        self.register_buffer("pe", pe, persistent=False)

    def forward(self, x):
        return x + self.pe[: x.shape[1]].unsqueeze(0)


def _head(d_in: int, hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d_in, hidden), nn.ReLU(), nn.Linear(hidden, d_out))


class MTETR(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = cfg = config or ModelConfig()
        pad = cfg.kernel // 2
        if cfg.use_resnet:
            self.stem = nn.Conv1d(cfg.in_planes, cfg.planes, cfg.kernel, padding=pad)
            self.blocks = nn.ModuleList(ResBlock(cfg.planes, cfg.kernel) for _ in range(cfg.res_blocks))
            self.down = nn.Conv1d(cfg.planes, cfg.embed_dim, cfg.kernel, padding=pad)
        else:
            self.stem = nn.Conv1d(cfg.in_planes, cfg.embed_dim, cfg.kernel, padding=pad)
            self.blocks = nn.ModuleList()
            self.down = None
        # unit-scale embeddings so the positional code does not swamp them
        self.embed_norm = ChannelNorm(cfg.embed_dim)
        self.posenc = PositionalEncoding(cfg.d_model)
        if cfg.use_transformer:
            layer = nn.TransformerEncoderLayer(
                cfg.d_model, cfg.heads, cfg.ff, cfg.dropout, batch_first=True, norm_first=True
            )
            self.encoder = nn.TransformerEncoder(
                layer, cfg.layers, norm=nn.LayerNorm(cfg.d_model), enable_nested_tensor=False
            )
        else:
            self.encoder = None
        self.rnn = (
            nn.LSTM(cfg.d_model, cfg.rnn_hidden, batch_first=True, bidirectional=True)
            if cfg.use_rnn
            else None
        )
        self.dia_head = _head(cfg.d_model, cfg.head_hidden, cfg.dia_out)
        self.det_head = _head(cfg.d_model, cfg.head_hidden, cfg.det_out)

    def forward(self, x: torch.Tensor, lengths: torch.Tensor | None = None):
        """x: (B, T, in_planes) -> dia logits (B, T, 5), det logits (B, T)."""
        if x.ndim != 3 or x.shape[-1] != self.config.in_planes:
            raise ShapeError(f"expected (B, T, {self.config.in_planes}) input, got {tuple(x.shape)}")
        B, T, _ = x.shape
        if lengths is None:
            lengths = torch.full((B,), T, dtype=torch.long)
        valid = torch.arange(T).unsqueeze(0) < lengths.unsqueeze(1)  # (B, T)
        mask = valid.unsqueeze(1).to(x.dtype)

        h = self.stem(x.transpose(1, 2)) * mask
        if self.config.use_resnet:
            h = torch.relu(h)
            for block in self.blocks:
                h = block(h, mask)
            h = self.down(h)
        h = self.embed_norm(h) * mask
        h = h.transpose(1, 2)  # (B, T, d)
        skip = h
        if self.encoder is not None:
            h = self.encoder(self.posenc(h), src_key_padding_mask=~valid)
        if self.rnn is not None:
            packed = pack_padded_sequence(h, lengths.cpu(), batch_first=True, enforce_sorted=False)
            out, _ = self.rnn(packed)
            h, _ = pad_packed_sequence(out, batch_first=True, total_length=T)
        if self.config.skip:
            h = h + skip
        return self.dia_head(h), self.det_head(h).squeeze(-1)


def build_model(config: ModelConfig, seed: int) -> MTETR:
    """Construct with weights drawn from ``seed`` rather than the ambient torch RNG state."""
    torch.manual_seed(seed)
    return MTETR(config)


@torch.no_grad()
def predict(model: MTETR, features: FeatureSequence) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode inference on one utterance: (dia probs T x 5, det probs T)."""
    if features.dim != model.config.in_planes:
        raise ShapeError(f"feature width {features.dim} != in_planes {model.config.in_planes}")
    was_training = model.training
    model.eval()
    try:
        dia, det = model(torch.from_numpy(features.frames).unsqueeze(0))
    finally:
        model.train(was_training)
    return torch.softmax(dia[0], -1).numpy(), torch.sigmoid(det[0]).numpy()
