"""Model and prompt geometry, plus the closed-form prompt parameter count."""

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelGeometry:
    """Encoder-decoder shape; layers applies to each side."""

    layers: int = 2
    d_model: int = 64
    heads: int = 4
    vocab_size: int = 128
    max_len: int = 1024
    ffn_dim: int | None = None

    def __post_init__(self):
        if min(self.layers, self.d_model, self.heads, self.vocab_size, self.max_len) <= 0:
            raise ValueError("all geometry fields must be positive")
        if self.d_model % self.heads:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.ffn_dim is not None and self.ffn_dim <= 0:
            raise ValueError("ffn_dim must be positive when given")

    @property
    def ffn(self) -> int:
        return self.ffn_dim if self.ffn_dim is not None else 4 * self.d_model


# One prompt bank per attention kind the prefixes attach to.
PROMPT_SITES = ("encoder_self", "decoder_self", "decoder_cross")


@dataclass(frozen=True)
class PrefixConfig:
    """Layer-wise prefix prompts: P learned vectors reparameterized through
    a d -> H -> L*2*d MLP into per-layer key/value prefixes at each site."""

    prompt_len: int = 100
    hidden: int = 800

    def __post_init__(self):
        if self.prompt_len <= 0 or self.hidden <= 0:
            raise ValueError("prompt_len and hidden must be positive")


def count_prompt_params(geom: ModelGeometry, cfg: PrefixConfig) -> int:
    """Trainable prompt parameters over all attachment sites.

    Per site: the P x d embedding table, the d -> H projection (weights and
    bias), and the H -> L*2*d projection (weights and bias).
    """
    p, d, h, layers = cfg.prompt_len, geom.d_model, cfg.hidden, geom.layers
    per_site = p * d + (d * h + h) + (h * layers * 2 * d + layers * 2 * d)
    return len(PROMPT_SITES) * per_site
