import torch

from prompt_trainer.data import make_batch
from prompt_trainer.geometry import PrefixConfig
from prompt_trainer.model import PromptSet, Seq2SeqModel, smoothed_cross_entropy

from tests.conftest import copy_task_stream, toy_geometry


def toy_setup(prompt_len=6):
    geom = toy_geometry(vocab_size=30)
    model = Seq2SeqModel(geom)
    src = torch.randint(4, 30, (3, 7))
    src[0, 5:] = 0
    mask = src != 0
    tgt = torch.randint(4, 30, (3, 5))
    prompts = PromptSet(geom, PrefixConfig(prompt_len=prompt_len, hidden=16))
    return geom, model, src, mask, tgt, prompts


class TestMaskingEquivalence:
    def test_zeroed_prompts_masked_off_is_bitwise_equal(self):
        _, model, src, mask, tgt, prompts = toy_setup()
        for bank in prompts.banks.values():
            bank.zero_output_()
        zeroed = {site: t.detach() for site, t in prompts.tensors().items()}
        assert all(float(t.abs().max()) == 0.0 for t in zeroed.values())
        plain = model(src, mask, tgt)
        masked = model(src, mask, tgt, prompts=zeroed, attend_prompts=False)
        assert torch.equal(plain, masked)

    def test_zeroed_prompts_attended_change_outputs(self):
        _, model, src, mask, tgt, prompts = toy_setup()
        for bank in prompts.banks.values():
            bank.zero_output_()
        zeroed = {site: t.detach() for site, t in prompts.tensors().items()}
        plain = model(src, mask, tgt)
        attended = model(src, mask, tgt, prompts=zeroed, attend_prompts=True)
        # extra attended positions shift softmax denominators
        assert not torch.equal(plain, attended)

    def test_nonzero_prompts_change_outputs(self):
        _, model, src, mask, tgt, prompts = toy_setup()
        tensors = {site: t.detach() for site, t in prompts.tensors().items()}
        plain = model(src, mask, tgt)
        prompted = model(src, mask, tgt, prompts=tensors)
        assert not torch.equal(plain, prompted)


class TestLoss:
    def test_label_smoothing_raises_loss_at_one_hot_optimum(self):
        vocab = 11
        targets = torch.tensor([[4, 5, 6]])
        mask = torch.ones_like(targets, dtype=torch.bool)
        logits = torch.full((1, 3, vocab), -30.0)
        for i, t in enumerate(targets[0]):
            logits[0, i, t] = 30.0
        sharp = smoothed_cross_entropy(logits, targets, mask, label_smoothing=0.0)
        smoothed = smoothed_cross_entropy(logits, targets, mask, label_smoothing=0.1)
        assert smoothed > sharp

    def test_padding_excluded(self):
        targets = torch.tensor([[4, 5, 0]])
        mask = torch.tensor([[True, True, False]])
        logits = torch.randn(1, 3, 11)
        loss_masked = smoothed_cross_entropy(logits, targets, mask)
        shrunk = smoothed_cross_entropy(logits[:, :2], targets[:, :2], mask[:, :2])
        assert torch.allclose(loss_masked, shrunk)

    def test_eval_loss_invariant_to_batch_order(self, small_vocab):
        stream = copy_task_stream("copy", small_vocab, 8, seed=3)
        geom = toy_geometry(vocab_size=40)
        model = Seq2SeqModel(geom)
        from prompt_trainer.data import Vocab

        vocab = Vocab.build(stream)
        batch_fwd = make_batch(stream, vocab, geom.max_len)
        batch_rev = make_batch(stream[::-1], vocab, geom.max_len)
        with torch.no_grad():
            loss_fwd = smoothed_cross_entropy(
                model(batch_fwd.src, batch_fwd.src_mask, batch_fwd.tgt_in), batch_fwd.tgt_out, batch_fwd.tgt_mask
            )
            loss_rev = smoothed_cross_entropy(
                model(batch_rev.src, batch_rev.src_mask, batch_rev.tgt_in), batch_rev.tgt_out, batch_rev.tgt_mask
            )
        assert torch.allclose(loss_fwd, loss_rev, atol=1e-6)


class TestBatching:
    def test_empty_input_rejected(self, small_vocab):
        from prompt_trainer.data import StreamExample, Vocab

        stream = [StreamExample("t", "d", "", "out")]
        vocab = Vocab.build(stream)
        try:
            make_batch(stream, vocab, 16)
        except ValueError as exc:
            assert "empty input" in str(exc)
        else:
            raise AssertionError("expected ValueError")

    def test_shapes_and_teacher_forcing_shift(self, small_vocab):
        from prompt_trainer.data import BOS, EOS, Vocab

        stream = copy_task_stream("copy", small_vocab, 4, seed=5)
        vocab = Vocab.build(stream)
        batch = make_batch(stream, vocab, 32)
        assert batch.tgt_in.shape == batch.tgt_out.shape
        assert all(int(row[0]) == BOS for row in batch.tgt_in)
        for row_in, row_out, row_mask in zip(batch.tgt_in, batch.tgt_out, batch.tgt_mask):
            length = int(row_mask.sum())
            assert int(row_out[length - 1]) == EOS
            assert row_in[1:length].tolist() == row_out[: length - 1].tolist()
