"""Short-term / long-term memory (SLM) block.

Shapes, per sample: fused features ``(D,)``; attention features ``af`` and
short-term memory ``s`` are ``(C', C)`` with ``C'`` hidden channels and ``C``
quality levels.  The long-term relational state lives in two square spaces:
label space ``(C, C)`` for the adjacency side and feature space ``(C', C')``
for the weight side.  Everything below is batched over a leading ``B`` axis.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import NumericError

GRAM_EPS = 1e-8


def _check_finite(name, t):
    if not torch.isfinite(t).all():
        raise NumericError(f"non-finite values in {name}")


def row_normalized_gram(x: torch.Tensor, over: str) -> torch.Tensor:
    """Gram matrix of label columns (``over="labels"``) or feature rows, L2 row-normalized."""
    if over == "labels":
        g = x.transpose(1, 2) @ x  # B, C, C
    else:
        g = x @ x.transpose(1, 2)  # B, C', C'
    return g / torch.sqrt((g * g).sum(dim=-1, keepdim=True) + GRAM_EPS)


class GramMap(nn.Module):
    """Nonlinear relation map: normalized Gram -> learned linear -> tanh."""

    def __init__(self, size: int, over: str):
        super().__init__()
        self.over = over
        self.linear = nn.Linear(size, size)

    def forward(self, x):
        return torch.tanh(self.linear(row_normalized_gram(x, self.over)))


class ShortTermMemory(nn.Module):
    def __init__(self, in_dim: int, hidden: int, num_levels: int, mask_hidden: int = None):
        super().__init__()
        mask_hidden = mask_hidden or hidden
        self.mask_mlp = nn.Sequential(
            nn.Linear(in_dim, mask_hidden), nn.ReLU(), nn.Linear(mask_hidden, num_levels))
        # 1x1 convolution on the pooled vector, i.e. a linear projection to C'
        self.proj = nn.Linear(in_dim, hidden)
        # 1x1 convolution over the stacked (af, gs) channels: 2C' -> C'
        self.fuse = nn.Linear(2 * hidden, hidden)

    def forward(self, fused: torch.Tensor):
        _check_finite("fused features", fused)
        m = self.mask_mlp(fused)                      # B, C
        p = self.proj(fused)                          # B, C'
        af = p.unsqueeze(2) * m.unsqueeze(1)          # B, C', C
        gs = torch.relu(af.mean(dim=2, keepdim=True)).expand_as(af)
        stacked = torch.cat([af, gs], dim=1)          # B, 2C', C
        s = (self.fuse(stacked.transpose(1, 2))).transpose(1, 2)
        return af, s


class LongTermMemory(nn.Module):
    """Gated two-pass relational refinement producing ``l`` in (0, 1)^(C' x C)."""

    def __init__(self, hidden: int, num_levels: int):
        super().__init__()
        self.f_a = GramMap(num_levels, over="labels")
        self.f_w = GramMap(hidden, over="features")
        self.gate_a = nn.Linear(2 * num_levels, num_levels)
        self.gate_w = nn.Linear(2 * hidden, hidden)
        # closed gates at init: the first forward pass leaves af and s untouched
        for g in (self.gate_a, self.gate_w):
            nn.init.zeros_(g.weight)
            nn.init.zeros_(g.bias)

    def forward(self, af: torch.Tensor, s: torch.Tensor):
        a0 = self.f_a(af)                                           # B, C, C
        w0 = self.f_w(s)                                            # B, C', C'
        rel_a = row_normalized_gram(af, "labels")
        rel_w = row_normalized_gram(s, "features")
        g_a = torch.tanh(self.gate_a(torch.cat([a0, rel_a], dim=-1)))
        g_w = torch.tanh(self.gate_w(torch.cat([w0, rel_w], dim=-1)))
        y_af = af + af @ (g_a * a0)
        y_s = s + (g_w * w0) @ s
        a1 = self.f_a(y_af)
        w1 = self.f_w(y_s)
        out = torch.sigmoid(w1 @ (af + s) @ a1)
        _check_finite("long-term memory", out)
        return out
