"""Two-stage training: full-backbone multi-task stage, then frozen-backbone
task-specific prompt stage. Checkpoints are single zip archives with a JSON
header (geometry, vocabulary, stage metadata) and a torch weights entry,
written atomically via rename."""

import io
import json
import os
import zipfile
from dataclasses import asdict, dataclass

import torch

from .data import Batch, StreamExample, Vocab, batches, make_batch
from .geometry import ModelGeometry, PrefixConfig
from .model import PromptSet, Seq2SeqModel, smoothed_cross_entropy

HEADER_NAME = "header.json"
WEIGHTS_NAME = "weights.pt"


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings.

    The production-scale recipe this mirrors uses batch size 8192; the
    default here is a desk-scale override. The learning rate is constant.
    """

    stage: int = 1
    lr: float = 3e-5
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-6
    weight_decay: float = 0.1
    label_smoothing: float = 0.1
    batch_size: int = 16
    steps: int = 50
    seed: int = 42

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError("stage must be 1 or 2")
        if self.steps <= 0 or self.batch_size <= 0:
            raise ValueError("steps and batch_size must be positive")


def make_optimizer(params, cfg: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        params, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps, weight_decay=cfg.weight_decay
    )


def _loss_on(model, batch: Batch, prompts, cfg: TrainConfig) -> torch.Tensor:
    logits = model(batch.src, batch.src_mask, batch.tgt_in, prompts=prompts)
    return smoothed_cross_entropy(logits, batch.tgt_out, batch.tgt_mask, cfg.label_smoothing)


def save_checkpoint(path: str, header: dict, state_dict: dict):
    buffer = io.BytesIO()
    torch.save(state_dict, buffer)
    tmp = path + ".tmp"
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        archive.writestr(HEADER_NAME, json.dumps(header, sort_keys=True))
        archive.writestr(WEIGHTS_NAME, buffer.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[dict, dict]:
    with zipfile.ZipFile(path) as archive:
        header = json.loads(archive.read(HEADER_NAME))
        state = torch.load(io.BytesIO(archive.read(WEIGHTS_NAME)), weights_only=True)
    return header, state


def backbone_checksum(model: Seq2SeqModel) -> str:
    import hashlib

    acc = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        acc.update(name.encode())
        acc.update(tensor.detach().cpu().numpy().tobytes())
    return acc.hexdigest()


@dataclass
class StageResult:
    model: Seq2SeqModel
    vocab: Vocab
    geometry: ModelGeometry
    losses: list[float]
    prompts: PromptSet | None = None


def train_stage1(
    stream: list[StreamExample],
    geom: ModelGeometry,
    cfg: TrainConfig,
    out_path: str | None = None,
) -> StageResult:
    """Supervised multi-task stage: every backbone parameter is trainable."""
    if cfg.stage != 1:
        raise ValueError("train_stage1 requires stage=1")
    if not stream:
        raise ValueError("empty training stream")
    torch.manual_seed(cfg.seed)
    vocab = Vocab.build(stream)
    geom = ModelGeometry(
        layers=geom.layers,
        d_model=geom.d_model,
        heads=geom.heads,
        vocab_size=len(vocab),
        max_len=geom.max_len,
        ffn_dim=geom.ffn_dim,
    )
    model = Seq2SeqModel(geom)
    optimizer = make_optimizer(model.parameters(), cfg)

    losses = []
    source = batches(stream, vocab, geom.max_len, cfg.batch_size)
    for _ in range(cfg.steps):
        batch = next(source)
        optimizer.zero_grad()
        loss = _loss_on(model, batch, None, cfg)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))

    if out_path:
        save_checkpoint(
            out_path,
            {"kind": "backbone", "geometry": asdict(geom), "vocab": vocab.tokens, "stage": 1},
            model.state_dict(),
        )
    return StageResult(model=model, vocab=vocab, geometry=geom, losses=losses)


def load_backbone(path: str) -> tuple[Seq2SeqModel, Vocab, ModelGeometry]:
    header, state = load_checkpoint(path)
    if header.get("kind") != "backbone":
        raise ValueError(f"{path} is not a backbone checkpoint")
    geom_fields = dict(header["geometry"])
    geom_fields["ffn_dim"] = geom_fields.pop("ffn_dim", None)
    geometry = ModelGeometry(**geom_fields)
    model = Seq2SeqModel(geometry)
    model.load_state_dict(state)
    vocab = Vocab.__new__(Vocab)
    vocab.tokens = list(header["vocab"])
    vocab.index = {tok: i for i, tok in enumerate(vocab.tokens)}
    return model, vocab, geometry


def train_stage2(
    stream: list[StreamExample],
    backbone: Seq2SeqModel,
    vocab: Vocab,
    task: str,
    cfg: TrainConfig,
    prefix: PrefixConfig,
    out_path: str | None = None,
) -> StageResult:
    """Frozen-backbone stage: only the task's prompt banks receive updates.

    The emitted checkpoint holds materialized per-layer K/V prefixes (the
    reparameterization MLP is discarded), so it loads next to any copy of
    the backbone weights.
    """
    if cfg.stage != 2:
        raise ValueError("train_stage2 requires stage=2")
    task_stream = [ex for ex in stream if ex.task == task]
    if not task_stream:
        raise ValueError(f"no examples of task {task!r} in the stream")
    torch.manual_seed(cfg.seed)

    backbone.zero_grad(set_to_none=True)
    for param in backbone.parameters():
        param.requires_grad_(False)
    backbone.eval()

    prompts = PromptSet(backbone.geom, prefix)
    trainable = list(prompts.parameters())
    assert not set(map(id, trainable)) & set(map(id, backbone.parameters()))
    optimizer = make_optimizer(trainable, cfg)

    losses = []
    source = batches(task_stream, vocab, backbone.geom.max_len, cfg.batch_size)
    for _ in range(cfg.steps):
        batch = next(source)
        optimizer.zero_grad()
        loss = _loss_on(backbone, batch, prompts.tensors(), cfg)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))

    if out_path:
        materialized = prompts.materialize()
        save_checkpoint(
            out_path,
            {
                "kind": "prompts",
                "task": task,
                "geometry": asdict(backbone.geom),
                "prefix": asdict(prefix),
                "stage": 2,
            },
            materialized,
        )
    return StageResult(model=backbone, vocab=vocab, geometry=backbone.geom, losses=losses, prompts=prompts)


def load_prompts(path: str) -> tuple[dict, dict[str, torch.Tensor]]:
    header, state = load_checkpoint(path)
    if header.get("kind") != "prompts":
        raise ValueError(f"{path} is not a prompt checkpoint")
    return header, state


def evaluate_loss(model, stream, vocab, cfg: TrainConfig, prompts=None) -> float:
    batch = make_batch(stream, vocab, model.geom.max_len)
    with torch.no_grad():
        return float(_loss_on(model, batch, prompts, cfg))
