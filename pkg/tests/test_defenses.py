import pytest
import torch
from pydantic import ValidationError

from src.defenses import DefenseConfig, UploadDefense, dp_perturb, topk_filter, topk_mask
from src.errors import DefenseError
from src.federation import train
from src.numerics import SeededRng, dense

from conftest import build_small_system


class TestLaplace:
    def test_zero_scale_is_identity(self, rng):
        h = dense([[1.0, -2.0], [0.5, 0.0]])
        assert torch.equal(dp_perturb(h, 0.0, rng), h)

    def test_noise_scale(self):
        h = torch.zeros(400, 50, dtype=torch.float64)
        noise = dp_perturb(h, 0.2, SeededRng(1))
        # E|Laplace(0, b)| = b
        assert float(noise.abs().mean()) == pytest.approx(0.2, rel=0.05)
        assert abs(float(noise.mean())) < 0.01

    def test_same_stream_same_noise(self):
        h = torch.ones(3, 4, dtype=torch.float64)
        assert torch.equal(dp_perturb(h, 0.1, SeededRng(2, (5,))), dp_perturb(h, 0.1, SeededRng(2, (5,))))

    def test_negative_scale(self, rng):
        with pytest.raises(DefenseError):
            dp_perturb(dense([[1.0]]), -0.1, rng)

    def test_scale_above_range_rejected_by_config(self):
        with pytest.raises(ValidationError):
            DefenseConfig(kind="dp", beta=0.6)


class TestTopK:
    def test_keeps_k_largest_per_row(self):
        h = dense([[0.1, 0.9, -0.3, 0.5], [4.0, 3.0, 2.0, 1.0]])
        assert torch.equal(topk_filter(h, 2), dense([[0.0, 0.9, 0.0, 0.5], [4.0, 3.0, 0.0, 0.0]]))

    def test_ties_keep_lowest_index(self):
        assert torch.equal(topk_filter(dense([[1.0, 1.0, 1.0, 0.0]]), 2), dense([[1.0, 1.0, 0.0, 0.0]]))

    def test_absolute_ranking(self):
        assert torch.equal(topk_filter(dense([[0.1, -0.9, 0.5]]), 1, absolute=True), dense([[0.0, -0.9, 0.0]]))

    def test_k_equal_d_is_identity(self):
        h = dense([[0.3, -0.1, 0.2]])
        assert torch.equal(topk_filter(h, 3), h)

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_out_of_range(self, k):
        with pytest.raises(DefenseError):
            topk_mask(dense([[0.3, -0.1, 0.2]]), k)

    def test_gradient_mask_matches_kept_components(self):
        defense = UploadDefense(DefenseConfig(kind="topk", k=1), 3)
        h = dense([[0.3, -0.1, 0.2]])
        assert torch.equal(defense.grad_mask(h), dense([[1.0, 0.0, 0.0]]))

    def test_k_larger_than_embedding(self):
        with pytest.raises(DefenseError):
            UploadDefense(DefenseConfig(kind="topk", k=8), 4)


def test_topk_uploads_are_sparse(sbm_graph):
    system = train(build_small_system(sbm_graph, epochs=15, defense=DefenseConfig(kind="topk", k=2)))
    for upload in system.uploads():
        assert ((upload != 0).sum(dim=1) <= 2).all()
    assert system.loss_history[-1] < system.loss_history[0]


def test_zero_scale_dp_trains_like_no_defense(sbm_graph):
    plain = train(build_small_system(sbm_graph, epochs=10))
    noiseless = train(build_small_system(sbm_graph, epochs=10, defense=DefenseConfig(kind="dp", beta=0.0)))
    assert plain.loss_history == noiseless.loss_history


def test_inference_noise_is_fixed_per_participant(sbm_graph):
    system = build_small_system(sbm_graph, epochs=1, defense=DefenseConfig(kind="dp", beta=0.1))
    assert torch.equal(system.global_embeddings(), system.global_embeddings())
    clean = torch.cat([p.embed() for p in system.participants], dim=1)
    assert not torch.equal(system.global_embeddings(), clean)
