"""Video-level orchestration: training, checkpointing and inference.

One training step processes one video end to end: forward over all clips,
Hungarian matching of prototypes to ground-truth instances over the
accumulated tubes, and a gradient step on the set-prediction loss. The
whole run is seeded; checkpoints carry the model, the optimizer, the data
order state and the merged config, so a resumed run continues bit-for-bit
where it stopped and inference needs nothing but the checkpoint file.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import config_hash, validate_config
from .dataset_io import read_dataset
from .losses import (
    downsample_mask,
    final_loss,
    hungarian_match,
    match_cost_matrix,
    prepare_targets,
    upsample_mask,
)
from .modeling import VideoOutputs, VideoSegmentationModel, split_into_clips
from .synthgen import VideoSample
from .tracks import TrackRecord, TrackSet

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}

__all__ = [
    "CheckpointError",
    "build_model",
    "forward_video",
    "infer_video",
    "load_checkpoint",
    "save_checkpoint",
    "split_into_clips",
    "train",
    "train_on_samples",
]


class CheckpointError(Exception):
    """Raised when a checkpoint does not fit the requested model."""


def build_model(config: dict) -> VideoSegmentationModel:
    """Construct the network described by a merged config."""
    model_cfg = config["model"]
    samh_cfg = config["samh"]
    model = VideoSegmentationModel(
        num_prototypes=model_cfg["num_prototypes"],
        embed_dim=model_cfg["embed_dim"],
        num_categories=model_cfg["num_categories"],
        frame_height=model_cfg["frame_height"],
        frame_width=model_cfg["frame_width"],
        decoder_layers=model_cfg["decoder_layers"],
        amodal_enabled=samh_cfg["enabled"],
        amodal_layers=samh_cfg["layers"],
        amodal_convs=samh_cfg["conv_layers"],
        use_visible_prior=samh_cfg["use_vspm"],
        use_amodal_prior=samh_cfg["use_aspm"],
        update_softmax=config["update"]["softmax"],
    )
    return model.to(DTYPES[model_cfg["dtype"]])


def frames_to_tensor(frames: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    """uint8 (T, 3, H, W) -> float tensor in [0, 1]."""
    return torch.from_numpy(frames.copy()).to(dtype) / 255.0


def _teacher_foreground(sample: VideoSample, stride: int) -> torch.Tensor:
    """Class-agnostic visible foreground union at feature resolution."""
    down = downsample_mask(sample.visible_masks, stride)
    return torch.from_numpy(down.any(axis=0).copy())


def forward_video(model: VideoSegmentationModel, sample: VideoSample,
                  config: dict, teacher_force: bool = False) -> VideoOutputs:
    dtype = DTYPES[config["model"]["dtype"]]
    frames = frames_to_tensor(sample.frames, dtype)
    teacher = None
    if teacher_force and config["samh"]["teacher_force_vspm"]:
        teacher = _teacher_foreground(sample, model.feature_stride)
    return model.forward_video(frames, config["clip"]["length"],
                               teacher_visible=teacher)


def training_step(model: VideoSegmentationModel, sample: VideoSample,
                  config: dict, optimizer: torch.optim.Optimizer) -> float:
    loss_cfg = config["loss"]
    outputs = forward_video(model, sample, config, teacher_force=True)
    targets = prepare_targets(sample, model.feature_stride)
    cost = match_cost_matrix(
        outputs.class_logits, outputs.visible_logits, outputs.amodal_logits,
        targets, class_weight=loss_cfg["class_weight"],
        visible_weight=loss_cfg["visible_weight"],
        amodal_weight=loss_cfg["amodal_weight"])
    assignment = hungarian_match(cost)
    intermediate = (outputs.intermediate_amodal
                    if config["samh"]["aux_loss"] else [])
    loss = final_loss(
        outputs.class_logits, outputs.visible_logits, outputs.amodal_logits,
        targets, assignment, intermediate_amodal=intermediate,
        class_weight=loss_cfg["class_weight"],
        visible_weight=loss_cfg["visible_weight"],
        amodal_weight=loss_cfg["amodal_weight"])
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def save_checkpoint(path: Path, model: VideoSegmentationModel,
                    optimizer: torch.optim.Optimizer, config: dict,
                    step: int, epoch: int, position: int,
                    epoch_order: list[int] | None,
                    rng: np.random.Generator) -> None:
    payload = {
        "config": config,
        "config_hash": config_hash(config),
        "step": step,
        "epoch": epoch,
        "position": position,
        "epoch_order": epoch_order,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "numpy_rng": rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: Path, model: VideoSegmentationModel,
                    optimizer: torch.optim.Optimizer | None = None) -> dict:
    """Load parameters into ``model``; raises naming any mismatched tensor."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    payload = torch.load(path, weights_only=False)
    own_state = model.state_dict()
    saved_state = payload["model_state"]
    for name, tensor in saved_state.items():
        if name not in own_state:
            raise CheckpointError(
                f"checkpoint parameter {name!r} does not exist in the model")
        if tuple(own_state[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"checkpoint parameter {name!r} has shape "
                f"{tuple(tensor.shape)}, model expects "
                f"{tuple(own_state[name].shape)}")
    missing = set(own_state) - set(saved_state)
    if missing:
        raise CheckpointError(
            f"checkpoint is missing parameter {sorted(missing)[0]!r}")
    model.load_state_dict(saved_state)
    if optimizer is not None and payload.get("optimizer_state") is not None:
        optimizer.load_state_dict(payload["optimizer_state"])
    return payload


@dataclass
class TrainResult:
    model: VideoSegmentationModel
    losses: list[float]
    checkpoint_path: Path | None


def train_on_samples(samples: list[VideoSample], config: dict,
                     out_dir: Path | None = None,
                     resume_from: Path | None = None) -> TrainResult:
    """Seeded training over in-memory samples.

    With an ``out_dir``, periodic and final checkpoints are written there;
    without one, training is purely in memory.
    """
    config = validate_config(config)
    if not samples:
        raise ValueError("training dataset is empty")
    train_cfg = config["train"]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(train_cfg["seed"])
    model = build_model(config)
    optimizer = torch.optim.Adam(model.parameters(),
                                 lr=train_cfg["learning_rate"])
    rng = np.random.default_rng(train_cfg["seed"])
    step, epoch, position = 0, 0, 0
    epoch_order: list[int] | None = None

    if resume_from is not None:
        payload = load_checkpoint(resume_from, model, optimizer)
        if payload["config_hash"] != config_hash(config):
            raise CheckpointError(
                "checkpoint was produced with a different config")
        step = payload["step"]
        epoch = payload["epoch"]
        position = payload["position"]
        epoch_order = payload["epoch_order"]
        rng.bit_generator.state = payload["numpy_rng"]
        torch.set_rng_state(payload["torch_rng"])

    losses: list[float] = []
    while epoch < train_cfg["epochs"]:
        if epoch_order is None:
            epoch_order = [int(i) for i in rng.permutation(len(samples))]
        while position < len(epoch_order):
            sample = samples[epoch_order[position]]
            loss = training_step(model, sample, config, optimizer)
            losses.append(loss)
            step += 1
            position += 1
            if step % train_cfg["log_interval"] == 0:
                logger.info("step %d (epoch %d): loss %.6f", step, epoch, loss)
            if (out_dir is not None
                    and step % train_cfg["checkpoint_interval"] == 0):
                save_checkpoint(out_dir / f"checkpoint_step{step:06d}.pt",
                                model, optimizer, config, step, epoch,
                                position, epoch_order, rng)
        epoch += 1
        position = 0
        epoch_order = None

    final_path = None
    if out_dir is not None:
        final_path = out_dir / "checkpoint.pt"
        save_checkpoint(final_path, model, optimizer, config, step, epoch,
                        position, epoch_order, rng)
    return TrainResult(model=model, losses=losses, checkpoint_path=final_path)


def train(config: dict, out_dir: Path,
          resume_from: Path | None = None) -> TrainResult:
    """Load the configured training dataset from disk and train."""
    config = validate_config(config)
    train_dir = config["data"]["train_dir"]
    if not train_dir:
        raise ValueError("config data.train_dir is not set")
    samples = read_dataset(train_dir)
    return train_on_samples(samples, config, out_dir, resume_from=resume_from)


def infer_video(model: VideoSegmentationModel, sample: VideoSample,
                config: dict) -> TrackSet:
    """Predict tracks for one video; identity is the prototype index."""
    stride = model.feature_stride
    score_threshold = config["infer"]["score_threshold"]
    with torch.no_grad():
        outputs = forward_video(model, sample, config)
        probs = outputs.class_probs.cpu().numpy()
        visible = (outputs.visible_logits > 0).cpu().numpy()
        if outputs.amodal_logits is not None:
            amodal = (outputs.amodal_logits > 0).cpu().numpy()
        else:
            amodal = np.zeros_like(visible)

    tracks: TrackSet = []
    num_categories = probs.shape[1] - 1
    for proto_idx in range(probs.shape[0]):
        category = int(np.argmax(probs[proto_idx, :num_categories]))
        score = float(probs[proto_idx, category])
        if score > score_threshold:
            tracks.append(TrackRecord(
                track_id=proto_idx,
                category=category,
                score=score,
                visible_tube=upsample_mask(visible[proto_idx], stride),
                amodal_tube=upsample_mask(amodal[proto_idx], stride),
            ))
    return tracks


def load_model_for_inference(checkpoint_path: Path,
                             ) -> tuple[VideoSegmentationModel, dict]:
    """Rebuild the model stored in a checkpoint; returns (model, config)."""
    path = Path(checkpoint_path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    payload = torch.load(path, weights_only=False)
    config = validate_config(payload["config"])
    model = build_model(config)
    load_checkpoint(path, model)
    model.eval()
    return model, config
