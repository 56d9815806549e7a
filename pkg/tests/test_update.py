import math

import pytest
import torch

from amodalvis.modeling import GlobalPrototypes, PrototypeUpdate

from oracles import check_parameter_gradients


class TestGlobalPrototypes:
    def test_identical_across_videos(self):
        torch.manual_seed(0)
        store = GlobalPrototypes(8, 32).double()
        assert torch.equal(store.init_state(), store.init_state())

    def test_shape(self):
        store = GlobalPrototypes(8, 32)
        assert store.init_state().shape == (8, 32)

    def test_gradient_flows_into_init_parameters(self):
        torch.manual_seed(1)
        store = GlobalPrototypes(3, 4).double()
        target = torch.randn(3, 4, dtype=torch.float64)

        def loss_fn():
            return ((store.init_state() - target) ** 2).sum()

        errors = check_parameter_gradients(store, loss_fn)
        assert "initial" in errors


class TestPrototypeUpdate:
    def test_zero_value_projection_residual_identity(self):
        torch.manual_seed(2)
        update = PrototypeUpdate(8).double()
        with torch.no_grad():
            update.value.weight.zero_()
        global_protos = torch.randn(4, 8, dtype=torch.float64)
        clip_protos = torch.randn(4, 8, dtype=torch.float64)
        assert torch.equal(update(global_protos, clip_protos), global_protos)

    def test_output_shape(self):
        torch.manual_seed(3)
        update = PrototypeUpdate(32).double()
        out = update(torch.randn(8, 32, dtype=torch.float64),
                     torch.randn(8, 32, dtype=torch.float64))
        assert out.shape == (8, 32)

    def test_two_prototype_scalar_case_matches_hand_loop(self):
        update = PrototypeUpdate(1).double()
        with torch.no_grad():
            update.query.weight.fill_(1.0)
            update.key.weight.fill_(2.0)
            update.value.weight.fill_(3.0)
        global_protos = torch.tensor([[1.0], [2.0]], dtype=torch.float64)
        clip_protos = torch.tensor([[0.5], [1.0]], dtype=torch.float64)
        out = update(global_protos, clip_protos)
        # hand loop: q_i = g_i, k_j = 2 c_j, v_j = 3 c_j
        for i in range(2):
            q = global_protos[i, 0].item()
            scores = [q * 2 * clip_protos[j, 0].item() for j in range(2)]
            exp = [math.exp(s) for s in scores]
            weights = [e / sum(exp) for e in exp]
            mixed = sum(w * 3 * clip_protos[j, 0].item()
                        for j, w in enumerate(weights))
            assert out[i, 0].item() == pytest.approx(
                global_protos[i, 0].item() + mixed, abs=1e-12)

    def test_permuting_clip_prototypes_leaves_update_invariant(self):
        torch.manual_seed(4)
        update = PrototypeUpdate(8).double()
        global_protos = torch.randn(5, 8, dtype=torch.float64)
        clip_protos = torch.randn(5, 8, dtype=torch.float64)
        base = update(global_protos, clip_protos)
        perm = torch.randperm(5)
        permuted = update(global_protos, clip_protos[perm])
        assert torch.allclose(base, permuted, atol=1e-6)

    def test_softmax_disabled_is_raw_affinity_mix(self):
        torch.manual_seed(5)
        update = PrototypeUpdate(4, softmax=False).double()
        global_protos = torch.randn(3, 4, dtype=torch.float64)
        clip_protos = torch.randn(3, 4, dtype=torch.float64)
        out = update(global_protos, clip_protos)
        affinity = update.query(global_protos) @ update.key(clip_protos).T
        expected = global_protos + affinity @ update.value(clip_protos)
        assert torch.allclose(out, expected, atol=1e-12)

    def test_width_mismatch_rejected(self):
        update = PrototypeUpdate(4).double()
        with pytest.raises(ValueError):
            update(torch.zeros(2, 4, dtype=torch.float64),
                   torch.zeros(2, 5, dtype=torch.float64))

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(6)
        update = PrototypeUpdate(3).double()
        global_protos = torch.randn(2, 3, dtype=torch.float64)
        clip_protos = torch.randn(2, 3, dtype=torch.float64)

        def loss_fn():
            return (update(global_protos, clip_protos) ** 2).sum()

        check_parameter_gradients(update, loss_fn)
