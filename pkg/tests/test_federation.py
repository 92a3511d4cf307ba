import pytest
import torch

from src.errors import GvflError, ShapeError
from src.federation import (
    TrainingConfig,
    accuracy,
    build_system,
    concat_embeddings,
    contribution,
    predict,
    restore_system,
    save_system,
    server_backward,
    train,
)
from src.graph import Graph, VerticalPartition, make_split
from src.numerics import SeededRng, SparseSymMatrix, Tape, backward, cross_entropy_logits

from conftest import build_small_system


def test_split_gradients_match_monolithic_backprop(sbm_graph):
    system = build_small_system(sbm_graph)
    uploads = [p.embed() for p in system.participants]
    _, server_grads, slices = server_backward(system, uploads)

    local_params = [[p.model.W0, p.model.W1] for p in system.participants]
    server_params = list(system.server.parameters())
    flat = [w for ws in local_params for w in ws] + server_params
    with Tape():
        h = concat_embeddings([p.model(p.adjacency, p.features) for p in system.participants])
        loss = cross_entropy_logits(system.server(h), system.labels, system.split.train_index)
    monolithic = backward(loss, flat)

    for p, upstream, params in zip(system.participants, slices, local_params):
        with Tape():
            embeddings = p.model(p.adjacency, p.features)
        split = backward(embeddings, params, seed=upstream)
        expected = monolithic[2 * p.index:2 * p.index + 2]
        assert all(torch.allclose(a, b, atol=1e-12) for a, b in zip(split, expected))
    assert all(torch.allclose(a, b, atol=1e-12) for a, b in zip(server_grads, monolithic[4:]))


def test_concat_needs_two_participants():
    with pytest.raises(ShapeError):
        concat_embeddings([torch.zeros(3, 2, dtype=torch.float64)])


def test_training_lowers_loss_and_stores_probabilities(trained_system):
    history = trained_system.loss_history
    assert len(history) == trained_system.training.epochs
    assert history[-1] < history[0]
    p = trained_system.probabilities
    assert p.shape == (trained_system.graph.n, trained_system.graph.num_classes)
    assert torch.allclose(p.sum(dim=1), torch.ones(p.shape[0], dtype=torch.float64))
    assert accuracy(trained_system, trained_system.split.train) >= 0.95


def test_training_is_deterministic(sbm_graph):
    a = train(build_small_system(sbm_graph, epochs=10))
    b = train(build_small_system(sbm_graph, epochs=10))
    assert a.loss_history == b.loss_history
    assert torch.equal(a.probabilities, b.probabilities)


def test_empty_accuracy_set(trained_system):
    with pytest.raises(GvflError):
        accuracy(trained_system, [])


def test_contribution_shares_sum_to_one(trained_system):
    shares = contribution(trained_system)
    assert len(shares) == 2
    assert sum(shares) == pytest.approx(1.0)
    assert all(0.0 <= s <= 1.0 for s in shares)


def test_override_with_own_embeddings_changes_nothing(trained_system):
    test = trained_system.split.test
    own = trained_system.uploads()[0]
    assert accuracy(trained_system, test, {0: own}) == accuracy(trained_system, test)


class TestContribution:
    @staticmethod
    def widened(graph, extra):
        return Graph(graph.n, graph.adjacency, torch.cat([graph.features, extra], dim=1), graph.labels,
                     graph.num_classes, name="widened")

    def test_identical_participants_share_equally(self, sbm_graph):
        graph = self.widened(sbm_graph, sbm_graph.features)
        width = sbm_graph.num_features
        shards = VerticalPartition.from_columns(graph, [range(width), range(width, 2 * width)])
        split = make_split(graph, SeededRng(11).derive("split"), 4, 4, 12)
        system = build_system(graph, shards, split, SeededRng(11), "gcn", 8, 4, TrainingConfig(server_hidden=[8]))
        system.participants[1].model.load_state_dict(system.participants[0].model.state_dict())
        with torch.no_grad():
            first = system.server.weights[0]
            first[4:8] = first[0:4].clone()
        assert contribution(system) == [0.5, 0.5]

    def test_informative_shard_contributes_most(self, sbm_graph):
        noise = torch.randn(sbm_graph.n, sbm_graph.num_features, dtype=torch.float64,
                            generator=torch.Generator().manual_seed(8))
        graph = self.widened(sbm_graph, noise)
        width = sbm_graph.num_features
        shards = VerticalPartition.from_columns(graph, [range(width), range(width, 2 * width)],
                                                [graph.adjacency, SparseSymMatrix.empty(graph.n)])
        split = make_split(graph, SeededRng(11).derive("split"), 4, 4, 12)
        training = TrainingConfig(epochs=60, lr=0.05, server_hidden=[8], log_every=0)
        system = train(build_system(graph, shards, split, SeededRng(11), "gcn", 8, 4, training))
        shares = contribution(system)
        assert shares[0] == max(shares)
        assert shares[0] > shares[1]


class TestProbabilityApi:
    def test_returns_server_probabilities_and_counts_rows(self, trained_system):
        api = trained_system.api()
        h = trained_system.global_embeddings()
        assert torch.allclose(predict(api, h), trained_system.probabilities)
        assert api.queries == trained_system.graph.n

    def test_exposes_no_parameters(self, trained_system):
        api = trained_system.api()
        assert not hasattr(api, "server")
        assert not hasattr(api, "parameters")
        with pytest.raises(AttributeError):
            api.server = trained_system.server

    def test_is_detached_from_later_server_updates(self, trained_system, sbm_graph):
        system = build_small_system(sbm_graph, epochs=1)
        api = system.api()
        h = system.global_embeddings()
        before = api.query(h)
        with torch.no_grad():
            for w in system.server.parameters():
                w.add_(1.0)
        assert torch.equal(api.query(h), before)

    def test_rejects_wrong_width(self, trained_system):
        with pytest.raises(ShapeError):
            trained_system.api().query(torch.zeros(2, 3, dtype=torch.float64))

    def test_query_never_carries_gradients(self, trained_system):
        api = trained_system.api()
        with Tape() as tape:
            h = tape.watch(trained_system.global_embeddings())
            probabilities = api.query(h)
        assert not probabilities.requires_grad
        assert probabilities.grad_fn is None
        assert not hasattr(api, "probabilities")

    def test_oracle_exposes_input_gradients_only(self, trained_system):
        oracle = trained_system.oracle()
        with Tape() as tape:
            h = tape.watch(trained_system.global_embeddings())
            loss = oracle.probabilities(h)[:, 0].sum()
        (grad,) = backward(loss, [h])
        assert grad.abs().sum() > 0
        assert oracle.queries == trained_system.graph.n
        assert not hasattr(oracle, "server")
        assert not hasattr(oracle, "parameters")


def test_checkpoint_restores_predictions(tmp_path, trained_system, sbm_graph):
    save_system(trained_system, tmp_path / "ckpt")
    fresh = restore_system(build_small_system(sbm_graph), tmp_path / "ckpt")
    assert torch.equal(fresh.probabilities, trained_system.probabilities)
    assert fresh.loss_history == trained_system.loss_history


def test_missing_checkpoint(tmp_path, sbm_graph):
    with pytest.raises(GvflError):
        restore_system(build_small_system(sbm_graph), tmp_path / "nothing")
