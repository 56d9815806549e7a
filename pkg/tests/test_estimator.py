import numpy as np
import pytest
from sklearn.base import clone

from amodalvis.estimator import AmodalVideoSegmenter
from amodalvis.dataset_io import write_dataset
from amodalvis.validation import as_samples, check_frames, check_sample

from conftest import micro_samples, micro_config


def tiny_estimator(**overrides):
    params = dict(num_prototypes=4, embed_dim=8, frame_height=16,
                  frame_width=16, decoder_layers=1, samh_layers=1,
                  samh_conv_layers=2, epochs=1, seed=0)
    params.update(overrides)
    return AmodalVideoSegmenter(**params)


@pytest.fixture
def samples():
    return micro_samples(micro_config(), count=2)


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = tiny_estimator()
        params = est.get_params()
        assert params["num_prototypes"] == 4
        est.set_params(num_prototypes=6)
        assert est.num_prototypes == 6

    def test_clone_preserves_params(self):
        est = tiny_estimator(use_vspm=False)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self, samples):
        with pytest.raises(RuntimeError, match="not fitted"):
            tiny_estimator().predict(samples)


class TestFitPredict:
    def test_fit_predict_score(self, samples):
        est = tiny_estimator(score_threshold=0.0)
        assert est.fit(samples) is est
        assert len(est.train_losses_) == len(samples)
        predictions = est.predict(samples)
        assert len(predictions) == len(samples)
        for tracks in predictions:
            for t in tracks:
                assert t.visible_tube.shape == (6, 16, 16)
        score = est.score(samples)
        assert 0.0 <= score <= 1.0

    def test_fit_from_dataset_directory(self, tmp_path, samples):
        write_dataset(samples, tmp_path / "ds")
        est = tiny_estimator()
        est.fit(tmp_path / "ds")
        assert len(est.train_losses_) == 2

    def test_fit_deterministic_across_instances(self, samples):
        a = tiny_estimator().fit(samples)
        b = tiny_estimator().fit(samples)
        assert a.train_losses_ == b.train_losses_

    def test_config_mirrors_params(self):
        config = tiny_estimator(use_aspm=False).build_config()
        assert config["samh"]["use_aspm"] is False
        assert config["model"]["num_prototypes"] == 4

    def test_wrong_frame_size_rejected(self, samples):
        est = tiny_estimator(frame_height=32, frame_width=32, epochs=0)
        est.fit(samples[:1])  # zero epochs: only builds the model
        with pytest.raises(ValueError):
            est.predict(samples)


class TestValidationHelpers:
    def test_check_frames_accepts_valid(self, samples):
        out = check_frames(samples[0].frames)
        assert out.dtype == np.uint8

    def test_check_frames_rejects_bad_shape(self):
        with pytest.raises(ValueError, match="shape"):
            check_frames(np.zeros((4, 16, 16), dtype=np.uint8))

    def test_check_frames_rejects_bad_dtype(self):
        with pytest.raises(ValueError, match="uint8"):
            check_frames(np.zeros((4, 3, 16, 16), dtype=np.float32))

    def test_check_sample_catches_mask_violation(self, samples):
        sample = samples[0]
        bad = sample.visible_masks.copy()
        bad[:, :, 0, 0] = True
        sample_bad = type(sample)(
            frames=sample.frames, visible_masks=bad,
            amodal_masks=np.zeros_like(bad), categories=sample.categories,
            depths=sample.depths,
            first_visible_frame=sample.first_visible_frame)
        with pytest.raises(ValueError, match="contained"):
            check_sample(sample_bad)

    def test_as_samples_single_and_list(self, samples):
        assert len(as_samples(samples[0])) == 1
        assert len(as_samples(samples)) == 2
        with pytest.raises(ValueError):
            as_samples([])
