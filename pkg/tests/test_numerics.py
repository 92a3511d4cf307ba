import pytest
import torch

from src.errors import ShapeError
from src.numerics import (
    AdamState,
    SeededRng,
    SparseSymMatrix,
    Tape,
    adam_step,
    backward,
    cross_entropy,
    cross_entropy_logits,
    dense,
    matmul,
    mse,
    row_softmax,
    spmm,
)


def random_symmetric(n: int, density: float, seed: int) -> SparseSymMatrix:
    g = torch.Generator().manual_seed(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if torch.rand(1, generator=g).item() < density]
    values = torch.rand(len(pairs), generator=g, dtype=torch.float64)
    return SparseSymMatrix.from_pairs(n, pairs, values)


class TestSparseSymMatrix:
    def test_from_pairs_canonicalizes_and_dedupes(self):
        s = SparseSymMatrix.from_pairs(4, [(2, 1), (1, 2), (0, 3)])
        assert s.edge_pairs() == [(0, 3), (1, 2)]
        assert s.num_edges == 2

    def test_dense_view_is_symmetric(self):
        d = random_symmetric(8, 0.4, 0).to_dense()
        assert torch.equal(d, d.T)

    def test_toggle_twice_restores(self, path_graph_adjacency):
        once = path_graph_adjacency.toggled(0, 4)
        assert once.get(4, 0) == 1.0
        assert once.differs_from(path_graph_adjacency) == 2
        assert once.toggled(4, 0).equals(path_graph_adjacency)

    def test_toggle_removes_present_edge(self, path_graph_adjacency):
        removed = path_graph_adjacency.toggled(1, 2)
        assert removed.get(1, 2) == 0.0
        assert removed.num_edges == path_graph_adjacency.num_edges - 1

    def test_self_loop_toggle_rejected(self, path_graph_adjacency):
        with pytest.raises(ShapeError):
            path_graph_adjacency.toggled(2, 2)


def test_spmm_matches_dense_product():
    s = random_symmetric(10, 0.3, 1)
    m = torch.randn(10, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    assert torch.allclose(spmm(s, m), s.to_dense() @ m, atol=1e-12)


def test_spmm_shape_mismatch():
    with pytest.raises(ShapeError):
        spmm(SparseSymMatrix.empty(3), torch.zeros(4, 2, dtype=torch.float64))


def test_spmm_gradient_against_finite_differences():
    s = random_symmetric(6, 0.5, 3)
    m = torch.randn(6, 2, dtype=torch.float64, generator=torch.Generator().manual_seed(4))
    values = s.values.clone().requires_grad_(True)
    assert torch.autograd.gradcheck(lambda v: spmm(s.with_values(v), m), (values,))


def test_row_softmax_is_shift_invariant_and_stable():
    logits = dense([[1000.0, 1001.0, 999.0], [0.0, 0.0, 0.0]])
    p = row_softmax(logits)
    assert torch.isfinite(p).all()
    assert torch.allclose(p.sum(dim=1), torch.ones(2, dtype=torch.float64))
    assert torch.allclose(p[0], row_softmax(logits - 1000.0)[0])
    assert torch.allclose(p[1], torch.full((3,), 1 / 3, dtype=torch.float64))


def test_cross_entropy_on_probabilities_matches_logits():
    logits = torch.randn(5, 3, dtype=torch.float64, generator=torch.Generator().manual_seed(5))
    labels = torch.tensor([0, 2, 1, 1, 0])
    mask = torch.tensor([0, 2, 4])
    assert torch.allclose(cross_entropy(row_softmax(logits), labels, mask), cross_entropy_logits(logits, labels, mask))


def test_cross_entropy_is_a_sum_over_masked_rows():
    probs = dense([[0.5, 0.5], [1.0, 0.0], [0.25, 0.75]])
    loss = cross_entropy(probs, torch.tensor([0, 0, 1]), torch.tensor([0, 1]))
    assert float(loss) == pytest.approx(-torch.log(torch.tensor(0.5)).item())


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ShapeError):
        cross_entropy(dense([[0.5, 0.5]]), torch.tensor([2]), torch.tensor([0]))


def test_mse_is_a_mean():
    assert float(mse(dense([[1.0, 3.0]]), dense([[0.0, 0.0]]))) == pytest.approx(5.0)
    with pytest.raises(ShapeError):
        mse(dense([[1.0]]), dense([[1.0, 2.0]]))


class TestTape:
    def test_unused_leaf_gets_zeros(self):
        with Tape() as tape:
            a = tape.watch(torch.ones(2, 2, dtype=torch.float64))
            b = tape.watch(torch.ones(3, dtype=torch.float64))
            loss = (a * 3.0).sum()
        ga, gb = backward(loss, [a, b])
        assert torch.equal(ga, torch.full((2, 2), 3.0, dtype=torch.float64))
        assert torch.equal(gb, torch.zeros(3, dtype=torch.float64))

    def test_non_scalar_loss_needs_seed(self):
        with Tape() as tape:
            a = tape.watch(torch.ones(2, dtype=torch.float64))
            out = a * 2.0
        with pytest.raises(ShapeError):
            backward(out, [a])

    def test_seeded_backward_is_a_vjp(self):
        w = torch.tensor([[1.0, 2.0], [3.0, 4.0]], dtype=torch.float64)
        with Tape() as tape:
            x = tape.watch(torch.tensor([[1.0, -1.0]], dtype=torch.float64))
            y = x @ w
        (gx,) = backward(y, [x], seed=torch.tensor([[1.0, 0.0]], dtype=torch.float64))
        assert torch.equal(gx, torch.tensor([[1.0, 3.0]], dtype=torch.float64))


class TestAdam:
    def test_first_step_moves_by_lr_times_sign(self):
        p = torch.nn.Parameter(torch.tensor([1.0, -1.0, 0.5], dtype=torch.float64))
        state = AdamState(lr=0.1)
        adam_step(state, [p], [torch.tensor([2.0, -3.0, 1e-3], dtype=torch.float64)])
        assert torch.allclose(p.detach(), torch.tensor([0.9, -0.9, 0.4], dtype=torch.float64), atol=1e-5)
        assert state.step == 1
        m, v = state.moments(p)
        assert torch.allclose(m, torch.tensor([0.2, -0.3, 1e-4], dtype=torch.float64))

    def test_rebinding_to_other_parameters_fails(self):
        state = AdamState()
        a = torch.nn.Parameter(torch.zeros(1, dtype=torch.float64))
        b = torch.nn.Parameter(torch.zeros(1, dtype=torch.float64))
        adam_step(state, [a], [torch.ones(1, dtype=torch.float64)])
        with pytest.raises(ShapeError):
            adam_step(state, [b], [torch.ones(1, dtype=torch.float64)])

    def test_gradient_shape_checked(self):
        p = torch.nn.Parameter(torch.zeros(2, dtype=torch.float64))
        with pytest.raises(ShapeError):
            adam_step(AdamState(), [p], [torch.zeros(3, dtype=torch.float64)])


def test_seeded_streams_are_reproducible_and_independent():
    rng = SeededRng(42)
    assert rng.derive("a", 1).numpy().random() == rng.derive("a", 1).numpy().random()
    assert rng.derive("a", 1).numpy().random() != rng.derive("a", 2).numpy().random()
    t1 = torch.rand(3, generator=rng.derive("t").torch())
    t2 = torch.rand(3, generator=rng.derive("t").torch())
    assert torch.equal(t1, t2)


class TestGradientsAgainstFiniteDifferences:
    SEEDS = range(20)

    @staticmethod
    def tensors(seed, *shapes):
        g = torch.Generator().manual_seed(seed)
        return [torch.randn(*s, dtype=torch.float64, generator=g).requires_grad_(True) for s in shapes]

    @pytest.mark.parametrize("seed", SEEDS)
    def test_matmul(self, seed):
        a, b = self.tensors(seed, (4, 3), (3, 5))
        assert torch.autograd.gradcheck(matmul, (a, b))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_mse(self, seed):
        a, b = self.tensors(seed, (3, 4), (3, 4))
        assert torch.autograd.gradcheck(mse, (a, b))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_row_softmax(self, seed):
        (m,) = self.tensors(seed, (4, 3))
        assert torch.autograd.gradcheck(row_softmax, (m,))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_cross_entropy(self, seed):
        (logits,) = self.tensors(seed, (5, 3))
        probs = row_softmax(logits.detach()).requires_grad_(True)
        labels = torch.tensor([0, 2, 1, 1, 0])
        mask = torch.tensor([0, 1, 3])
        assert torch.autograd.gradcheck(lambda p: cross_entropy(p, labels, mask), (probs,))


class TestAdamConvergence:
    def test_reaches_the_bottom_of_a_quadratic_bowl(self):
        centre = torch.tensor([1.5, -2.0, 0.25], dtype=torch.float64)
        p = torch.nn.Parameter(torch.zeros(3, dtype=torch.float64))
        state = AdamState(lr=0.05)
        for _ in range(1000):
            adam_step(state, [p], [2.0 * (p.detach() - centre)])
        assert torch.allclose(p.detach(), centre, atol=1e-3)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        start = torch.tensor([0.3, -0.7], dtype=torch.float64)
        p = torch.nn.Parameter(start.clone())
        state = AdamState(lr=0.1)
        for _ in range(3):
            adam_step(state, [p], [torch.zeros(2, dtype=torch.float64)])
        assert torch.equal(p.detach(), start)
