import pytest
import torch

from amodalvis.modeling import ClipPrototypeModel

from oracles import finite_difference_gradient, max_relative_error


def tiny_model(embed_dim=4, num_prototypes=3, height=8, width=8, seed=0):
    torch.manual_seed(seed)
    return ClipPrototypeModel(embed_dim, num_prototypes, height, width).double()


def test_feature_shape_contract():
    torch.manual_seed(0)
    model = ClipPrototypeModel(32, 8, 64, 64).double()
    clip = torch.randn(3, 3, 64, 64, dtype=torch.float64)
    features = model.encode_frames(clip)
    assert features.shape == (3, 32, 16, 16)


def test_zero_clip_zero_params_gives_zero_features():
    model = tiny_model()
    with torch.no_grad():
        for p in model.encoder.parameters():
            p.zero_()
    clip = torch.zeros(2, 3, 8, 8, dtype=torch.float64)
    assert not model.encode_frames(clip).any()


def test_encoding_deterministic():
    model = tiny_model()
    clip = torch.randn(2, 3, 8, 8, dtype=torch.float64)
    a = model.encode_frames(clip)
    b = model.encode_frames(clip)
    assert torch.equal(a, b)


def test_non_divisible_frame_size_rejected_at_construction():
    with pytest.raises(ValueError, match="stride"):
        ClipPrototypeModel(8, 4, 30, 64)
    with pytest.raises(ValueError, match="stride"):
        ClipPrototypeModel(8, 4, 64, 30)


def test_wrong_clip_size_rejected():
    model = tiny_model()
    with pytest.raises(ValueError):
        model.encode_frames(torch.zeros(1, 3, 16, 16, dtype=torch.float64))


def test_prototype_shape_contract():
    torch.manual_seed(0)
    model = ClipPrototypeModel(32, 8, 64, 64).double()
    clip = torch.randn(2, 3, 64, 64, dtype=torch.float64)
    prototypes, features = model(clip)
    assert prototypes.shape == (8, 32)
    assert features.shape == (2, 32, 16, 16)


def test_query_permutation_permutes_prototypes():
    model = tiny_model(seed=3)
    clip = torch.randn(2, 3, 8, 8, dtype=torch.float64)
    base, _ = model(clip)
    perm = torch.tensor([2, 0, 1])
    with torch.no_grad():
        model.queries.copy_(model.queries[perm].clone())
    permuted, _ = model(clip)
    assert torch.allclose(permuted, base[perm], atol=1e-12)


def test_gradient_wrt_encoder_input_matches_finite_differences():
    model = tiny_model(seed=1)
    clip = torch.randn(2, 3, 8, 8, dtype=torch.float64, requires_grad=True)

    def loss_fn():
        prototypes, _ = model(clip)
        return prototypes.sum()

    loss = loss_fn()
    loss.backward()
    numeric = finite_difference_gradient(loss_fn, clip.data, eps=1e-5)
    assert max_relative_error(clip.grad, numeric) <= 1e-4


def test_gradient_wrt_queries_and_decoder_params():
    model = tiny_model(seed=2)
    clip = torch.randn(2, 3, 8, 8, dtype=torch.float64)

    def loss_fn():
        prototypes, _ = model(clip)
        return (prototypes ** 2).sum()

    model.zero_grad()
    loss_fn().backward()
    for name, param in model.named_parameters():
        assert param.grad is not None, name
        numeric = finite_difference_gradient(loss_fn, param.data, eps=1e-5)
        assert max_relative_error(param.grad, numeric) <= 1e-4, name
