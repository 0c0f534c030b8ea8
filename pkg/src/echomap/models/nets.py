"""The six neural mapping architectures ([B x C x T] -> [B x C x T], float64)."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .spec import MappingKind, MappingSpec


class ShallowMLP(nn.Module):
    """Per-timestep spatial map: time is folded into the batch dimension."""

    def __init__(self, n_channels: int, hidden: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(n_channels, hidden)
        self.bn = nn.BatchNorm1d(hidden)
        self.drop = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden, n_channels)

    def forward(self, x):
        b, c, t = x.shape
        h = x.permute(0, 2, 1).reshape(b * t, c)
        h = self.drop(F.gelu(self.bn(self.fc1(h))))
        return self.fc2(h).reshape(b, t, c).permute(0, 2, 1)


class _DepthwiseSeparable(nn.Module):
    def __init__(self, width: int, kernel: int, dilation: int, dropout: float):
        super().__init__()
        pad = dilation * (kernel - 1) // 2
        self.depthwise = nn.Conv1d(width, width, kernel, padding=pad,
                                   dilation=dilation, groups=width)
        self.pointwise = nn.Conv1d(width, width, 1)
        self.bn = nn.BatchNorm1d(width)
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        return self.drop(F.gelu(self.bn(self.pointwise(self.depthwise(x)))))


class CNN1D(nn.Module):
    """Stack of depthwise-separable convolutions with dilations 1, 2, 4, 8."""

    def __init__(self, n_channels: int, width: int, dropout: float, kernel: int = 3):
        super().__init__()
        self.inp = nn.Conv1d(n_channels, width, 1)
        self.blocks = nn.ModuleList(
            [_DepthwiseSeparable(width, kernel, d, dropout) for d in (1, 2, 4, 8)]
        )
        self.out = nn.Conv1d(width, n_channels, 1)

    def forward(self, x):
        h = self.inp(x)
        for block in self.blocks:
            h = block(h)
        return self.out(h)


class UNet1D(nn.Module):
    """Two stride-2 downsamplings, dilated bottleneck, transposed-conv decoder
    that concatenates the matching encoder output at each scale."""

    def __init__(self, n_channels: int, base: int, dropout: float, kernel: int = 3):
        super().__init__()
        f0, f1, f2 = base, 2 * base, 4 * base
        pad = kernel // 2
        self.inp = nn.Conv1d(n_channels, f0, 1)
        self.down1 = nn.Conv1d(f0, f1, kernel, stride=2, padding=pad)
        self.bn1 = nn.BatchNorm1d(f1)
        self.down2 = nn.Conv1d(f1, f2, kernel, stride=2, padding=pad)
        self.bn2 = nn.BatchNorm1d(f2)
        self.bottleneck = nn.Conv1d(f2, f2, kernel, padding=2 * pad, dilation=2)
        self.bn3 = nn.BatchNorm1d(f2)
        self.up1 = nn.ConvTranspose1d(f2, f1, 2, stride=2)
        self.merge1 = nn.Conv1d(2 * f1, f1, kernel, padding=pad)
        self.bn4 = nn.BatchNorm1d(f1)
        self.up2 = nn.ConvTranspose1d(f1, f0, 2, stride=2)
        self.merge2 = nn.Conv1d(2 * f0, f0, kernel, padding=pad)
        self.bn5 = nn.BatchNorm1d(f0)
        self.drop = nn.Dropout(dropout)
        self.out = nn.Conv1d(f0, n_channels, 1)

    def forward(self, x):
        t = x.shape[-1]
        t_pad = (-t) % 4
        if t_pad:
            x = F.pad(x, (0, t_pad))
        e0 = self.inp(x)
        e1 = self.drop(F.gelu(self.bn1(self.down1(e0))))
        e2 = self.drop(F.gelu(self.bn2(self.down2(e1))))
        h = self.drop(F.gelu(self.bn3(self.bottleneck(e2))))
        h = self.up1(h)
        h = self.drop(F.gelu(self.bn4(self.merge1(torch.cat([h, e1], dim=1)))))
        h = self.up2(h)
        h = self.drop(F.gelu(self.bn5(self.merge2(torch.cat([h, e0], dim=1)))))
        return self.out(h)[:, :, :t]


class BiGRU(nn.Module):
    """Two-layer bidirectional GRU; each direction runs at hidden/2 so the
    concatenated state matches the nominal hidden size."""

    def __init__(self, n_channels: int, hidden: int, dropout: float):
        super().__init__()
        if hidden % 2:
            raise ValueError("rnn hidden size must be even (split across directions)")
        self.gru = nn.GRU(n_channels, hidden // 2, num_layers=2, batch_first=True,
                          bidirectional=True, dropout=dropout)
        self.out = nn.Linear(hidden, n_channels)

    def forward(self, x):
        h, _ = self.gru(x.permute(0, 2, 1))
        return self.out(h).permute(0, 2, 1)


class _CausalBlock(nn.Module):
    def __init__(self, width: int, kernel: int, dilation: int, dropout: float):
        super().__init__()
        self.pad = dilation * (kernel - 1)
        self.conv1 = nn.Conv1d(width, width, kernel, dilation=dilation)
        self.bn1 = nn.BatchNorm1d(width)
        self.conv2 = nn.Conv1d(width, width, kernel, dilation=dilation)
        self.bn2 = nn.BatchNorm1d(width)
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        h = self.drop(F.gelu(self.bn1(self.conv1(F.pad(x, (self.pad, 0))))))
        h = self.drop(F.gelu(self.bn2(self.conv2(F.pad(h, (self.pad, 0))))))
        return x + h


class TCN(nn.Module):
    """Five causal residual blocks with dilations 1, 2, 4, 8, 16."""

    def __init__(self, n_channels: int, width: int, dropout: float, kernel: int = 3):
        super().__init__()
        self.inp = nn.Conv1d(n_channels, width, 1)
        self.blocks = nn.ModuleList(
            [_CausalBlock(width, kernel, d, dropout) for d in (1, 2, 4, 8, 16)]
        )
        self.out = nn.Conv1d(width, n_channels, 1)

    def forward(self, x):
        h = self.inp(x)
        for block in self.blocks:
            h = block(h)
        return self.out(h)


class TemporalTransformer(nn.Module):
    """Pointwise projection to d_model, sinusoidal positions, pre-LayerNorm
    encoder stack, linear projection back to the sensor space."""

    def __init__(self, n_channels: int, d_model: int, n_layers: int, n_heads: int,
                 ffn_dim: int, dropout: float):
        super().__init__()
        self.inp = nn.Conv1d(n_channels, d_model, 1, bias=False)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model, nhead=n_heads, dim_feedforward=ffn_dim,
            dropout=dropout, activation="gelu", batch_first=True, norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, n_layers, norm=nn.LayerNorm(d_model),
                                             enable_nested_tensor=False)
        self.out = nn.Linear(d_model, n_channels)
        self.d_model = d_model

    def _positional(self, t: int, dtype, device):
        pos = torch.arange(t, dtype=dtype, device=device)[:, None]
        idx = torch.arange(0, self.d_model, 2, dtype=dtype, device=device)
        angle = pos / torch.pow(torch.tensor(10000.0, dtype=dtype, device=device),
                                idx / self.d_model)
        enc = torch.zeros(t, self.d_model, dtype=dtype, device=device)
        enc[:, 0::2] = torch.sin(angle)
        enc[:, 1::2] = torch.cos(angle)
        return enc

    def forward(self, x):
        h = self.inp(x).permute(0, 2, 1)
        h = h + self._positional(h.shape[1], h.dtype, h.device)
        return self.out(self.encoder(h)).permute(0, 2, 1)


def build_module(spec: MappingSpec, seed: int) -> nn.Module:
    """Instantiate a float64 module with seeded initialization."""
    torch.manual_seed(seed)
    c, p = spec.n_channels, spec.dropout
    if spec.kind is MappingKind.SHALLOW_MLP:
        module = ShallowMLP(c, spec.hidden_size, p)
    elif spec.kind is MappingKind.CNN1D:
        module = CNN1D(c, spec.hidden_size, p)
    elif spec.kind is MappingKind.UNET1D:
        module = UNet1D(c, spec.hidden_size, p)
    elif spec.kind is MappingKind.RNN:
        module = BiGRU(c, spec.hidden_size, p)
    elif spec.kind is MappingKind.TCN:
        module = TCN(c, spec.hidden_size, p)
    elif spec.kind is MappingKind.TRANSFORMER:
        module = TemporalTransformer(c, spec.hidden_size, spec.n_layers,
                                     spec.n_heads, spec.ffn_dim, p)
    else:
        raise ValueError(f"no neural module for {spec.kind}")
    return module.double()
