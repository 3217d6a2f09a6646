"""Toy encoder-decoder transformer with layer-wise key/value prefix prompts.

Prefixes are trainable vectors prepended to the keys and values of every
attention module (encoder self-attention, decoder self-attention, decoder
cross-attention). Each site owns a prompt bank: a P x d embedding table
reparameterized through a two-layer MLP into per-layer K/V prefixes. After
prompt training the MLP is dropped and the materialized prefixes are
cached, so a prompt checkpoint loads alongside any copy of the backbone.
"""

import math

import torch
from torch import nn

from .data import PAD
from .geometry import PROMPT_SITES, ModelGeometry, PrefixConfig

NEG_INF = float("-inf")


class PromptBank(nn.Module):
    """Per-site prompt parameters producing (layers, 2, P, d) K/V prefixes."""

    def __init__(self, geom: ModelGeometry, cfg: PrefixConfig):
        super().__init__()
        self.layers = geom.layers
        self.prompt_len = cfg.prompt_len
        self.d_model = geom.d_model
        self.embed = nn.Parameter(torch.randn(cfg.prompt_len, geom.d_model) * 0.02)
        self.net = nn.Sequential(
            nn.Linear(geom.d_model, cfg.hidden),
            nn.Tanh(),
            nn.Linear(cfg.hidden, geom.layers * 2 * geom.d_model),
        )

    def forward(self) -> torch.Tensor:
        flat = self.net(self.embed)  # (P, L*2*d)
        return flat.view(self.prompt_len, self.layers, 2, self.d_model).permute(1, 2, 0, 3)

    def zero_output_(self):
        """Force the reparameterized prefixes to be exactly zero."""
        final = self.net[-1]
        nn.init.zeros_(final.weight)
        nn.init.zeros_(final.bias)
        return self


class PromptSet(nn.Module):
    """One bank per attachment site."""

    def __init__(self, geom: ModelGeometry, cfg: PrefixConfig):
        super().__init__()
        self.banks = nn.ModuleDict({site: PromptBank(geom, cfg) for site in PROMPT_SITES})

    def tensors(self) -> dict[str, torch.Tensor]:
        return {site: bank() for site, bank in self.banks.items()}

    def materialize(self) -> dict[str, torch.Tensor]:
        """Cache the reparameterized prefixes; the MLP is no longer needed."""
        with torch.no_grad():
            return {site: bank().detach().clone() for site, bank in self.banks.items()}


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.heads, self.head_dim).transpose(1, 2)

    def forward(
        self,
        query: torch.Tensor,
        keyvalue: torch.Tensor,
        mask: torch.Tensor | None = None,
        prefix: torch.Tensor | None = None,
        attend_prompts: bool = True,
    ) -> torch.Tensor:
        """mask: bool (B, Q, K) over real key positions, True = attend.

        ``prefix`` is a (2, P, d) K/V block prepended to the projected keys
        and values; prompt positions are attendable by every query. With
        ``attend_prompts`` off they are excluded from the attended set,
        which is mathematically identical to giving them -inf logits
        (zero softmax weight) but keeps the promptless equality bitwise.
        """
        batch, q_len, _ = query.shape
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(keyvalue))
        v = self._split(self.v_proj(keyvalue))

        prompt_len = 0
        if prefix is not None and attend_prompts:
            prompt_len = prefix.shape[1]
            pk = prefix[0].unsqueeze(0).expand(batch, -1, -1)
            pv = prefix[1].unsqueeze(0).expand(batch, -1, -1)
            k = torch.cat([self._split(pk), k], dim=2)
            v = torch.cat([self._split(pv), v], dim=2)

        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if mask is not None:
            full = mask
            if prompt_len:
                attend = torch.ones(batch, q_len, prompt_len, dtype=torch.bool, device=query.device)
                full = torch.cat([attend, mask], dim=-1)
            scores = scores.masked_fill(~full.unsqueeze(1), NEG_INF)

        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(batch, q_len, -1)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, hidden: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(d_model, hidden), nn.GELU(), nn.Linear(hidden, d_model))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, geom: ModelGeometry):
        super().__init__()
        self.norm1 = nn.LayerNorm(geom.d_model)
        self.attn = MultiHeadAttention(geom.d_model, geom.heads)
        self.norm2 = nn.LayerNorm(geom.d_model)
        self.ffn = FeedForward(geom.d_model, geom.ffn)

    def forward(self, x, pad_mask, prefix, attend_prompts):
        h = self.norm1(x)
        x = x + self.attn(h, h, mask=pad_mask, prefix=prefix, attend_prompts=attend_prompts)
        return x + self.ffn(self.norm2(x))


class DecoderLayer(nn.Module):
    def __init__(self, geom: ModelGeometry):
        super().__init__()
        self.norm1 = nn.LayerNorm(geom.d_model)
        self.self_attn = MultiHeadAttention(geom.d_model, geom.heads)
        self.norm2 = nn.LayerNorm(geom.d_model)
        self.cross_attn = MultiHeadAttention(geom.d_model, geom.heads)
        self.norm3 = nn.LayerNorm(geom.d_model)
        self.ffn = FeedForward(geom.d_model, geom.ffn)

    def forward(self, x, causal_mask, memory, memory_mask, self_prefix, cross_prefix, attend_prompts):
        h = self.norm1(x)
        x = x + self.self_attn(h, h, mask=causal_mask, prefix=self_prefix, attend_prompts=attend_prompts)
        x = x + self.cross_attn(
            self.norm2(x), memory, mask=memory_mask, prefix=cross_prefix, attend_prompts=attend_prompts
        )
        return x + self.ffn(self.norm3(x))


def _site(prompts: dict[str, torch.Tensor] | None, name: str, layer: int):
    if prompts is None or name not in prompts:
        return None
    return prompts[name][layer]


class Seq2SeqModel(nn.Module):
    """Pre-norm transformer encoder-decoder over a word vocabulary."""

    def __init__(self, geom: ModelGeometry):
        super().__init__()
        self.geom = geom
        self.token_embed = nn.Embedding(geom.vocab_size, geom.d_model, padding_idx=PAD)
        self.pos_embed = nn.Embedding(geom.max_len, geom.d_model)
        self.encoder = nn.ModuleList(EncoderLayer(geom) for _ in range(geom.layers))
        self.enc_norm = nn.LayerNorm(geom.d_model)
        self.decoder = nn.ModuleList(DecoderLayer(geom) for _ in range(geom.layers))
        self.dec_norm = nn.LayerNorm(geom.d_model)
        self.lm_head = nn.Linear(geom.d_model, geom.vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.token_embed(ids) + self.pos_embed(positions)[None, :, :]

    def encode(self, src, src_mask, prompts=None, attend_prompts=True):
        x = self._embed(src)
        pad = src_mask[:, None, :].expand(-1, src.shape[1], -1)
        for i, layer in enumerate(self.encoder):
            x = layer(x, pad, _site(prompts, "encoder_self", i), attend_prompts)
        return self.enc_norm(x)

    def decode(self, tgt_in, memory, src_mask, prompts=None, attend_prompts=True):
        batch, t_len = tgt_in.shape
        x = self._embed(tgt_in)
        causal = torch.tril(torch.ones(t_len, t_len, dtype=torch.bool, device=tgt_in.device))
        causal = causal[None, :, :] & (tgt_in != PAD)[:, None, :]
        memory_mask = src_mask[:, None, :].expand(-1, t_len, -1)
        for i, layer in enumerate(self.decoder):
            x = layer(
                x,
                causal,
                memory,
                memory_mask,
                _site(prompts, "decoder_self", i),
                _site(prompts, "decoder_cross", i),
                attend_prompts,
            )
        return self.lm_head(self.dec_norm(x))

    def forward(self, src, src_mask, tgt_in, prompts=None, attend_prompts=True):
        memory = self.encode(src, src_mask, prompts, attend_prompts)
        return self.decode(tgt_in, memory, src_mask, prompts, attend_prompts)


def smoothed_cross_entropy(
    logits: torch.Tensor,
    targets: torch.Tensor,
    target_mask: torch.Tensor,
    label_smoothing: float = 0.1,
) -> torch.Tensor:
    """Token-mean sequence loss with uniform label smoothing over the vocab.

    loss = (1 - eps) * NLL + eps * mean negative log-prob; reduction is
    total over unmasked tokens divided by their count, so evaluation loss
    is invariant to batch order.
    """
    log_probs = torch.log_softmax(logits, dim=-1)
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    uniform = -log_probs.mean(dim=-1)
    per_token = (1.0 - label_smoothing) * nll + label_smoothing * uniform
    mask = target_mask.to(per_token.dtype)
    return (per_token * mask).sum() / mask.sum()
