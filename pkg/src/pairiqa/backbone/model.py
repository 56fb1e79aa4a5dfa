"""Contrastive image/text encoders (residual attention-pool and patch transformer).

Parameter names follow the published checkpoints so a state dict can be
loaded without renaming. ``pos_mode`` controls the positional term of the
image encoder:

* ``vanilla``       learned embedding added; input must be the native size
* ``interpolated``  embedding grid bilinearly resampled to the input's grid
* ``removed``       no positional term at all; any input size
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

POS_MODES = ("removed", "vanilla", "interpolated")
VARIANTS = ("residual-attnpool", "patch-transformer")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyper-parameters, as recorded in the model card."""
    variant: str
    embed_dim: int
    image_size: int
    vision_layers: tuple
    vision_width: int
    vision_heads: int
    context_length: int
    vocab_size: int
    text_width: int
    text_heads: int
    text_layers: int
    patch_size: int = 32
    activation: str = "quick_gelu"


def resample_grid(pos: torch.Tensor, src: tuple, dst: tuple) -> torch.Tensor:
    """Bilinearly resample a (h*w, C) positional grid to (dst_h*dst_w, C).

    Half-pixel sample centres (``align_corners=False``), edges clamped.
    """
    if tuple(src) == tuple(dst):
        return pos
    c = pos.shape[-1]
    grid = pos.reshape(1, src[0], src[1], c).permute(0, 3, 1, 2)
    grid = F.interpolate(grid, size=tuple(dst), mode="bilinear", align_corners=False)
    return grid.permute(0, 2, 3, 1).reshape(dst[0] * dst[1], c)


class QuickGELU(nn.Module):
    def forward(self, x):
        return x * torch.sigmoid(1.702 * x)


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, inplanes, planes, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(inplanes, planes, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.avgpool = nn.AvgPool2d(stride) if stride > 1 else nn.Identity()
        self.conv3 = nn.Conv2d(planes, planes * 4, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(planes * 4)
        self.downsample = None
        if stride > 1 or inplanes != planes * 4:
            self.downsample = nn.Sequential(OrderedDict([
                ("-1", nn.AvgPool2d(stride)),
                ("0", nn.Conv2d(inplanes, planes * 4, 1, stride=1, bias=False)),
                ("1", nn.BatchNorm2d(planes * 4)),
            ]))

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = F.relu(self.bn2(self.conv2(out)))
        out = self.avgpool(out)
        out = self.bn3(self.conv3(out))
        identity = x if self.downsample is None else self.downsample(x)
        return F.relu(out + identity)


class AttentionPool2d(nn.Module):
    """Single-query attention pooling; the query is the mean token."""

    def __init__(self, spatial_dim, embed_dim, num_heads, output_dim, pos_mode="removed"):
        super().__init__()
        self.spatial_dim = spatial_dim
        self.pos_mode = pos_mode
        if pos_mode != "removed":
            self.positional_embedding = nn.Parameter(torch.zeros(spatial_dim ** 2 + 1, embed_dim))
        self.k_proj = nn.Linear(embed_dim, embed_dim)
        self.q_proj = nn.Linear(embed_dim, embed_dim)
        self.v_proj = nn.Linear(embed_dim, embed_dim)
        self.c_proj = nn.Linear(embed_dim, output_dim)
        self.num_heads = num_heads

    def positional_term(self, h, w):
        if self.pos_mode == "removed":
            return None
        pos = self.positional_embedding
        if self.pos_mode == "vanilla":
            if (h, w) != (self.spatial_dim, self.spatial_dim):
                raise ValueError(f"vanilla positional embedding needs a {self.spatial_dim}x{self.spatial_dim} grid, got {h}x{w}")
            return pos
        spatial = resample_grid(pos[1:], (self.spatial_dim, self.spatial_dim), (h, w))
        return torch.cat([pos[:1], spatial], dim=0)

    def forward(self, x):
        n, c, h, w = x.shape
        x = x.flatten(2).permute(0, 2, 1)  # N, HW, C
        x = torch.cat([x.mean(dim=1, keepdim=True), x], dim=1)
        pos = self.positional_term(h, w)
        if pos is not None:
            x = x + pos.to(x.dtype)[None]
        heads = self.num_heads
        hd = c // heads
        q = self.q_proj(x[:, :1]).reshape(n, 1, heads, hd).transpose(1, 2)
        k = self.k_proj(x).reshape(n, -1, heads, hd).transpose(1, 2)
        v = self.v_proj(x).reshape(n, -1, heads, hd).transpose(1, 2)
        attn = torch.softmax((q * hd ** -0.5) @ k.transpose(-2, -1), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(n, c)
        return self.c_proj(out)


class ModifiedResNet(nn.Module):
    def __init__(self, layers, output_dim, heads, input_resolution=224, width=64, pos_mode="removed"):
        super().__init__()
        self.input_resolution = input_resolution
        self.conv1 = nn.Conv2d(3, width // 2, 3, stride=2, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(width // 2)
        self.conv2 = nn.Conv2d(width // 2, width // 2, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(width // 2)
        self.conv3 = nn.Conv2d(width // 2, width, 3, padding=1, bias=False)
        self.bn3 = nn.BatchNorm2d(width)
        self.avgpool = nn.AvgPool2d(2)
        self._inplanes = width
        self.layer1 = self._make_layer(width, layers[0])
        self.layer2 = self._make_layer(width * 2, layers[1], stride=2)
        self.layer3 = self._make_layer(width * 4, layers[2], stride=2)
        self.layer4 = self._make_layer(width * 8, layers[3], stride=2)
        self.attnpool = AttentionPool2d(input_resolution // 32, width * 32, heads, output_dim, pos_mode)

    def _make_layer(self, planes, blocks, stride=1):
        layers = [Bottleneck(self._inplanes, planes, stride)]
        self._inplanes = planes * Bottleneck.expansion
        layers += [Bottleneck(self._inplanes, planes) for _ in range(1, blocks)]
        return nn.Sequential(*layers)

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        x = F.relu(self.bn2(self.conv2(x)))
        x = F.relu(self.bn3(self.conv3(x)))
        x = self.avgpool(x)
        x = self.layer4(self.layer3(self.layer2(self.layer1(x))))
        return self.attnpool(x)


class ResidualAttentionBlock(nn.Module):
    def __init__(self, width, heads, activation="quick_gelu"):
        super().__init__()
        self.attn = nn.MultiheadAttention(width, heads)
        self.ln_1 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(OrderedDict([
            ("c_fc", nn.Linear(width, width * 4)),
            ("gelu", QuickGELU() if activation == "quick_gelu" else nn.GELU()),
            ("c_proj", nn.Linear(width * 4, width)),
        ]))
        self.ln_2 = nn.LayerNorm(width)

    def forward(self, x, attn_mask=None):
        y = self.ln_1(x)
        x = x + self.attn(y, y, y, need_weights=False, attn_mask=attn_mask)[0]
        return x + self.mlp(self.ln_2(x))


class Transformer(nn.Module):
    def __init__(self, width, layers, heads, activation="quick_gelu"):
        super().__init__()
        self.resblocks = nn.ModuleList([ResidualAttentionBlock(width, heads, activation) for _ in range(layers)])

    def forward(self, x, attn_mask=None):
        # x: (L, N, C)
        for blk in self.resblocks:
            x = blk(x, attn_mask)
        return x


class VisionTransformer(nn.Module):
    def __init__(self, input_resolution, patch_size, width, layers, heads, output_dim,
                 pos_mode="removed", activation="quick_gelu"):
        super().__init__()
        self.input_resolution = input_resolution
        self.patch_size = patch_size
        self.grid = input_resolution // patch_size
        self.pos_mode = pos_mode
        self.conv1 = nn.Conv2d(3, width, patch_size, stride=patch_size, bias=False)
        scale = width ** -0.5
        self.class_embedding = nn.Parameter(scale * torch.randn(width))
        if pos_mode != "removed":
            self.positional_embedding = nn.Parameter(scale * torch.randn(self.grid ** 2 + 1, width))
        self.ln_pre = nn.LayerNorm(width)
        self.transformer = Transformer(width, layers, heads, activation)
        self.ln_post = nn.LayerNorm(width)
        self.proj = nn.Parameter(scale * torch.randn(width, output_dim))

    def positional_term(self, h, w):
        if self.pos_mode == "removed":
            return None
        pos = self.positional_embedding
        if self.pos_mode == "vanilla":
            if (h, w) != (self.grid, self.grid):
                raise ValueError(f"vanilla positional embedding needs a {self.grid}x{self.grid} grid, got {h}x{w}")
            return pos
        return torch.cat([pos[:1], resample_grid(pos[1:], (self.grid, self.grid), (h, w))], dim=0)

    def forward(self, x):
        x = self.conv1(x)
        n, c, h, w = x.shape
        x = x.flatten(2).permute(0, 2, 1)
        cls = self.class_embedding.to(x.dtype).expand(n, 1, c)
        x = torch.cat([cls, x], dim=1)
        pos = self.positional_term(h, w)
        if pos is not None:
            x = x + pos.to(x.dtype)[None]
        x = self.ln_pre(x).permute(1, 0, 2)
        x = self.transformer(x).permute(1, 0, 2)
        return self.ln_post(x[:, 0]) @ self.proj


class CLIPModel(nn.Module):
    def __init__(self, spec: ModelSpec, pos_mode: str = "removed"):
        super().__init__()
        if pos_mode not in POS_MODES:
            raise ValueError(f"unknown positional mode {pos_mode!r}")
        self.spec = spec
        if spec.variant == "residual-attnpool":
            self.visual = ModifiedResNet(spec.vision_layers, spec.embed_dim, spec.vision_heads,
                                         spec.image_size, spec.vision_width, pos_mode)
        elif spec.variant == "patch-transformer":
            self.visual = VisionTransformer(spec.image_size, spec.patch_size, spec.vision_width,
                                            spec.vision_layers[0], spec.vision_heads, spec.embed_dim,
                                            pos_mode, spec.activation)
        else:
            raise ValueError(f"unknown variant {spec.variant!r}")
        self.transformer = Transformer(spec.text_width, spec.text_layers, spec.text_heads, spec.activation)
        self.token_embedding = nn.Embedding(spec.vocab_size, spec.text_width)
        self.positional_embedding = nn.Parameter(torch.zeros(spec.context_length, spec.text_width))
        self.ln_final = nn.LayerNorm(spec.text_width)
        self.text_projection = nn.Parameter(torch.zeros(spec.text_width, spec.embed_dim))
        self.logit_scale = nn.Parameter(torch.zeros(()))
        mask = torch.full((spec.context_length, spec.context_length), float("-inf")).triu_(1)
        self.register_buffer("attn_mask", mask, persistent=False)

    def encode_image(self, pixels: torch.Tensor) -> torch.Tensor:
        return self.visual(pixels)

    def encode_token_embeddings(self, x: torch.Tensor, eot_index: torch.Tensor) -> torch.Tensor:
        """Text features from already-embedded tokens ``x`` of shape (N, L, W)."""
        x = x + self.positional_embedding.to(x.dtype)
        x = self.transformer(x.permute(1, 0, 2), self.attn_mask.to(x.dtype)).permute(1, 0, 2)
        x = self.ln_final(x)
        return x[torch.arange(x.shape[0]), eot_index] @ self.text_projection

    def encode_text(self, ids: torch.Tensor) -> torch.Tensor:
        return self.encode_token_embeddings(self.token_embedding(ids), ids.argmax(dim=-1))
