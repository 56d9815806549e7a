import pytest
import torch

from amodalvis.config import validate_config
from amodalvis.synthgen import SceneConfig, generate_scene

# keep CPU math reproducible across the suite
torch.set_num_threads(torch.get_num_threads())


def micro_config(**overrides) -> dict:
    """A tiny, fast config for pipeline-level tests (16x16 frames)."""
    base = {
        "generate": {"height": 16, "width": 16, "num_frames": 6,
                     "num_instances_min": 1, "num_instances_max": 2,
                     "size_min": 2.0, "size_max": 5.0, "num_videos": 2,
                     "seed": 0},
        "model": {"num_prototypes": 4, "embed_dim": 8, "num_categories": 3,
                  "frame_height": 16, "frame_width": 16, "decoder_layers": 1,
                  "dtype": "float64"},
        "clip": {"length": 3},
        "samh": {"layers": 1, "conv_layers": 2},
        "train": {"learning_rate": 1e-3, "epochs": 1, "seed": 0,
                  "checkpoint_interval": 2, "log_interval": 100},
    }
    for section, values in overrides.items():
        base.setdefault(section, {}).update(values)
    return validate_config(base)


def micro_samples(config: dict, count: int = 2, seed: int = 0):
    gen = config["generate"]
    scene = SceneConfig(
        height=gen["height"], width=gen["width"],
        num_frames=gen["num_frames"],
        num_instances_min=gen["num_instances_min"],
        num_instances_max=gen["num_instances_max"],
        num_categories=gen["num_categories"],
        size_min=gen["size_min"], size_max=gen["size_max"],
        speed_max=gen["speed_max"], bounce=gen["bounce"],
        noise_std=gen["noise_std"], spawn_margin=gen["spawn_margin"])
    return [generate_scene(scene, seed=seed + i) for i in range(count)]


@pytest.fixture
def tiny_config():
    return micro_config()


@pytest.fixture
def tiny_samples(tiny_config):
    return micro_samples(tiny_config)
