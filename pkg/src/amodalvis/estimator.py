"""Scikit-learn style estimator facade over the video pipeline.

``fit`` trains on a list of video samples (or a dataset directory) and
``predict`` returns one track set per video, so the model composes with
the usual sklearn tooling (``get_params`` / ``set_params`` / ``clone``).
Hyperparameters mirror the JSON config keys one-to-one.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .config import validate_config
from .metrics import evaluate_tracking
from .pipeline import infer_video, train_on_samples
from .tracks import TrackSet, tracks_from_sample
from .validation import as_samples


class AmodalVideoSegmenter(BaseEstimator):
    """Amodal-aware video instance segmentation and tracking model.

    Parameters mirror the run-config keys; see the README's config
    reference. ``fit`` expects ground-truth video samples; ``predict``
    returns per-video track sets whose identity is stable across frames,
    including fully occluded spans.
    """

    def __init__(self, num_prototypes=8, embed_dim=32, num_categories=3,
                 frame_height=64, frame_width=64, decoder_layers=2,
                 clip_length=3, samh_enabled=True, samh_layers=2,
                 samh_conv_layers=4, use_vspm=True, use_aspm=True,
                 teacher_force_vspm=False, samh_aux_loss=False,
                 update_softmax=True, class_weight=1.0, visible_weight=1.0,
                 amodal_weight=1.0, learning_rate=1e-3, epochs=3, seed=0,
                 score_threshold=0.3, dtype="float64",
                 tracking_geometry="box"):
        self.num_prototypes = num_prototypes
        self.embed_dim = embed_dim
        self.num_categories = num_categories
        self.frame_height = frame_height
        self.frame_width = frame_width
        self.decoder_layers = decoder_layers
        self.clip_length = clip_length
        self.samh_enabled = samh_enabled
        self.samh_layers = samh_layers
        self.samh_conv_layers = samh_conv_layers
        self.use_vspm = use_vspm
        self.use_aspm = use_aspm
        self.teacher_force_vspm = teacher_force_vspm
        self.samh_aux_loss = samh_aux_loss
        self.update_softmax = update_softmax
        self.class_weight = class_weight
        self.visible_weight = visible_weight
        self.amodal_weight = amodal_weight
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.score_threshold = score_threshold
        self.dtype = dtype
        self.tracking_geometry = tracking_geometry

    def build_config(self) -> dict:
        """The validated run config equivalent to this estimator."""
        return validate_config({
            "model": {
                "num_prototypes": self.num_prototypes,
                "embed_dim": self.embed_dim,
                "num_categories": self.num_categories,
                "frame_height": self.frame_height,
                "frame_width": self.frame_width,
                "decoder_layers": self.decoder_layers,
                "dtype": self.dtype,
            },
            "clip": {"length": self.clip_length},
            "samh": {
                "enabled": self.samh_enabled,
                "layers": self.samh_layers,
                "conv_layers": self.samh_conv_layers,
                "use_vspm": self.use_vspm,
                "use_aspm": self.use_aspm,
                "teacher_force_vspm": self.teacher_force_vspm,
                "aux_loss": self.samh_aux_loss,
            },
            "update": {"softmax": self.update_softmax},
            "loss": {
                "class_weight": self.class_weight,
                "visible_weight": self.visible_weight,
                "amodal_weight": self.amodal_weight,
            },
            "train": {
                "learning_rate": self.learning_rate,
                "epochs": self.epochs,
                "seed": self.seed,
            },
            "infer": {"score_threshold": self.score_threshold},
            "eval": {"tracking_geometry": self.tracking_geometry},
        })

    def fit(self, X, y=None):
        """Train on videos; X is a dataset directory or sample list."""
        samples = as_samples(X)
        config = self.build_config()
        result = train_on_samples(samples, config)
        self.model_ = result.model
        self.config_ = config
        self.train_losses_ = result.losses
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit first")

    def predict(self, X) -> list[TrackSet]:
        """One track set per input video."""
        self._check_fitted()
        samples = as_samples(X)
        return [infer_video(self.model_, s, self.config_) for s in samples]

    def score(self, X, y=None) -> float:
        """Amodal tube AP against the ground truth carried by X."""
        self._check_fitted()
        samples = as_samples(X)
        preds = [infer_video(self.model_, s, self.config_) for s in samples]
        gts = [tracks_from_sample(s) for s in samples]
        report = evaluate_tracking(preds, gts, tube="amodal",
                                   tracking_geometry=self.tracking_geometry)
        return report.ap
