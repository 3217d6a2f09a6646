"""Trainer acceptance suite: one test per release criterion, each printing
a pass/fail line (run with ``pytest -s``)."""

import random

import torch

from prompt_trainer.data import make_batch
from prompt_trainer.generation import GenConfig, contains_repeated_ngram, generate
from prompt_trainer.geometry import ModelGeometry, PrefixConfig, count_prompt_params
from prompt_trainer.model import PromptSet, smoothed_cross_entropy
from prompt_trainer.training import TrainConfig, backbone_checksum, train_stage1, train_stage2

from tests.conftest import copy_task_stream, toy_geometry

PASS = "[PASS]"


def report(name):
    print(f"{PASS} {name}")


class TestPromptParameterCriterion:
    def test_counts(self):
        large = ModelGeometry(layers=12, d_model=1024, heads=16, vocab_size=50265)
        count = count_prompt_params(large, PrefixConfig(prompt_len=100, hidden=800))
        relative = abs(count - 62_000_000) / 62_000_000
        assert relative < 0.02

        toy = toy_geometry(d_model=64)
        toy_cfg = PrefixConfig(prompt_len=4, hidden=32)
        enumerated = sum(p.numel() for p in PromptSet(toy, toy_cfg).parameters())
        assert count_prompt_params(toy, toy_cfg) == enumerated

        report(
            f"prompt parameters: 12x1024 geometry gives {count:,} ({relative:.2%} from 62M, < 2%); "
            "toy count equals enumeration oracle exactly"
        )


class TestStage2FreezingCriterion:
    def test_checksum_and_finite_differences(self):
        vocab = [f"w{i}" for i in range(10)]
        stream = copy_task_stream("summarization", vocab, 16, seed=31)
        stage1 = train_stage1(stream, toy_geometry(), TrainConfig(stage=1, steps=5, batch_size=8, seed=8))

        before = backbone_checksum(stage1.model)
        cfg = TrainConfig(stage=2, steps=100, batch_size=8, lr=1e-2, seed=9)
        train_stage2(stream, stage1.model, stage1.vocab, "summarization", cfg, PrefixConfig(4, 8))
        assert backbone_checksum(stage1.model) == before

        model = stage1.model.double()
        prompts = PromptSet(model.geom, PrefixConfig(prompt_len=3, hidden=8)).double()
        batch = make_batch(stream[:6], stage1.vocab, model.geom.max_len)

        def loss_value():
            logits = model(batch.src, batch.src_mask, batch.tgt_in, prompts=prompts.tensors())
            return smoothed_cross_entropy(logits, batch.tgt_out, batch.tgt_mask, 0.1)

        loss_value().backward()
        rng = random.Random(17)
        params = [p for p in prompts.parameters() if p.grad is not None]
        h = 1e-5
        worst = 0.0
        for _ in range(10):
            param = rng.choice(params)
            index = rng.randrange(param.numel())
            analytic = float(param.grad.flatten()[index])
            with torch.no_grad():
                original = float(param.flatten()[index])
                param.flatten()[index] = original + h
                plus = float(loss_value())
                param.flatten()[index] = original - h
                minus = float(loss_value())
                param.flatten()[index] = original
            numeric = (plus - minus) / (2 * h)
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, rel)
            assert rel < 1e-3
        report(
            "stage-2 freezing: backbone checksum unchanged after 100 prompt steps; "
            f"10 prompt gradients match central differences (worst rel err {worst:.2e} < 1e-3)"
        )


class TestBeamConstraintCriterion:
    def test_zero_repeated_trigrams_over_200_generations(self):
        vocab = [f"w{i}" for i in range(12)]
        stream = copy_task_stream("copy", vocab, 200, seed=41)
        stage1 = train_stage1(
            stream, toy_geometry(), TrainConfig(stage=1, steps=20, batch_size=16, lr=1e-3, seed=12)
        )
        gen = GenConfig(strategy="beam", beam_width=5, no_repeat_ngram=3, max_new_tokens=12)
        outputs = generate(stage1.model, stage1.vocab, [ex.input for ex in stream], gen)
        assert len(outputs) == 200
        violations = 0
        for text in outputs:
            ids = stage1.vocab.encode(text, 64)
            if contains_repeated_ngram(ids, 3):
                violations += 1
        assert violations == 0
        report("beam decoding: 0 repeated trigrams across 200 toy generations (beam 5, no-repeat 3)")
