import pytest

from prompt_trainer.geometry import PROMPT_SITES, ModelGeometry, PrefixConfig, count_prompt_params
from prompt_trainer.model import PromptBank, PromptSet

from tests.conftest import toy_geometry


class TestGeometryInvariants:
    def test_heads_must_divide_width(self):
        with pytest.raises(ValueError, match="divisible"):
            ModelGeometry(layers=2, d_model=30, heads=4, vocab_size=10)

    def test_positive_fields(self):
        with pytest.raises(ValueError):
            ModelGeometry(layers=0, d_model=32, heads=4, vocab_size=10)

    def test_default_max_len(self):
        assert ModelGeometry(layers=2, d_model=32, heads=4, vocab_size=10).max_len == 1024


class TestPrefixConfig:
    def test_defaults(self):
        cfg = PrefixConfig()
        assert cfg.prompt_len == 100 and cfg.hidden == 800

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            PrefixConfig(prompt_len=0)
        with pytest.raises(ValueError):
            PrefixConfig(hidden=0)


class TestPromptParameterCount:
    def test_large_geometry_near_62m(self):
        geom = ModelGeometry(layers=12, d_model=1024, heads=16, vocab_size=50265)
        count = count_prompt_params(geom, PrefixConfig())
        assert count == 61_823_328
        assert abs(count - 62_000_000) / 62_000_000 < 0.02

    def test_toy_count_equals_enumeration_oracle(self):
        geom = toy_geometry(d_model=64)
        cfg = PrefixConfig(prompt_len=4, hidden=32)
        # oracle: walk the module tree and add up tensor sizes
        enumerated = sum(p.numel() for p in PromptSet(geom, cfg).parameters())
        assert count_prompt_params(geom, cfg) == enumerated

    def test_single_bank_matches_per_site_share(self):
        geom = toy_geometry()
        cfg = PrefixConfig(prompt_len=3, hidden=8)
        bank_params = sum(p.numel() for p in PromptBank(geom, cfg).parameters())
        assert count_prompt_params(geom, cfg) == len(PROMPT_SITES) * bank_params

    def test_prefix_tensor_shape(self):
        geom = toy_geometry()
        cfg = PrefixConfig(prompt_len=5, hidden=16)
        tensors = PromptSet(geom, cfg).tensors()
        assert set(tensors) == set(PROMPT_SITES)
        for value in tensors.values():
            assert tuple(value.shape) == (geom.layers, 2, cfg.prompt_len, geom.d_model)
