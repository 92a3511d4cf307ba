import numpy as np
import pytest
import torch

from src.errors import GraphParseError, PartitionError
from src.graph import (
    EDGES_FILE,
    FEATURES_FILE,
    LABELS_FILE,
    VerticalPartition,
    convert_citation,
    load_graph,
    make_split,
    normalize,
    partition,
    synth_sbm,
)
from src.numerics import SeededRng, SparseSymMatrix


def write_dataset(root, edges="0\t1\n1\t2\n2\t3\n3\t0\n0\t1\n", labels="0,b\n1,a\n2,b\n3,a\n",
                  features="1,0\n0,1\n1,1\n0,0\n"):
    root.mkdir(parents=True, exist_ok=True)
    (root / EDGES_FILE).write_text(edges)
    (root / LABELS_FILE).write_text(labels)
    if features is not None:
        (root / FEATURES_FILE).write_text(features)
    return root


class TestLoadGraph:
    def test_three_file_layout(self, tmp_path):
        root = write_dataset(tmp_path / "toy")
        graph = load_graph(root / EDGES_FILE, root / FEATURES_FILE, root / LABELS_FILE)
        assert graph.n == 4
        assert graph.num_edges == 4
        assert graph.raw_edge_count == 5
        assert graph.name == "toy"
        # Labels are remapped in sorted name order.
        assert graph.label_names == ("a", "b")
        assert graph.labels.tolist() == [1, 0, 1, 0]
        assert graph.features.shape == (4, 2)

    def test_identity_features_when_featureless(self, tmp_path):
        root = write_dataset(tmp_path / "blogs", features=None)
        graph = load_graph(root / EDGES_FILE, None, root / LABELS_FILE)
        assert torch.equal(graph.features, torch.eye(4, dtype=torch.float64))

    def test_non_contiguous_labels(self, tmp_path):
        root = write_dataset(tmp_path / "gap", labels="0,a\n2,b\n")
        with pytest.raises(GraphParseError, match="non-contiguous"):
            load_graph(root / EDGES_FILE, None, root / LABELS_FILE)

    def test_bad_edge_line_reports_line_number(self, tmp_path):
        root = write_dataset(tmp_path / "bad", edges="0\t1\n1 2\n")
        with pytest.raises(GraphParseError) as info:
            load_graph(root / EDGES_FILE, root / FEATURES_FILE, root / LABELS_FILE)
        assert info.value.line == 2

    def test_edge_out_of_range(self, tmp_path):
        root = write_dataset(tmp_path / "range", edges="0\t9\n")
        with pytest.raises(GraphParseError, match="out of range"):
            load_graph(root / EDGES_FILE, root / FEATURES_FILE, root / LABELS_FILE)

    def test_ragged_features(self, tmp_path):
        root = write_dataset(tmp_path / "ragged", features="1,0\n0\n1,1\n0,0\n")
        with pytest.raises(GraphParseError):
            load_graph(root / EDGES_FILE, root / FEATURES_FILE, root / LABELS_FILE)


def test_normalize_matches_dense_formula(path_graph_adjacency):
    a = path_graph_adjacency.to_dense() + torch.eye(5, dtype=torch.float64)
    d = torch.diag(a.sum(dim=1).pow(-0.5))
    assert torch.allclose(normalize(path_graph_adjacency).to_dense(), d @ a @ d, atol=1e-12)


def test_normalize_isolated_node_keeps_unit_self_loop():
    s = normalize(SparseSymMatrix.from_pairs(3, [(0, 1)]))
    assert s.get(2, 2) == pytest.approx(1.0)
    assert s.get(0, 1) == pytest.approx(0.5)


class TestPartition:
    def test_features_mode_splits_columns(self, sbm_graph, rng):
        parts = partition(sbm_graph, 3, "features", rng)
        flat = sorted(parts.column_permutation)
        assert flat == list(range(sbm_graph.num_features))
        assert all(shard is sbm_graph.adjacency for shard in parts.edge_shards)
        assert [len(c) for c in parts.feature_columns] == [2, 2, 2]

    def test_dual_mode_partitions_edges(self, sbm_graph, rng):
        parts = partition(sbm_graph, 2, "dual", rng)
        a, b = parts.edge_shards
        assert not set(a.edge_pairs()) & set(b.edge_pairs())
        assert sorted(a.edge_pairs() + b.edge_pairs()) == sbm_graph.adjacency.edge_pairs()
        assert abs(a.num_edges - b.num_edges) <= 1

    def test_partition_is_seeded(self, sbm_graph):
        one = partition(sbm_graph, 2, "dual", SeededRng(5))
        two = partition(sbm_graph, 2, "dual", SeededRng(5))
        assert one.feature_columns == two.feature_columns
        assert one.edge_shards[0].equals(two.edge_shards[0])

    @pytest.mark.parametrize("k, mode", [(1, "features"), (3, "dual"), (7, "features")])
    def test_invalid_participant_counts(self, sbm_graph, rng, k, mode):
        with pytest.raises(PartitionError):
            partition(sbm_graph, k, mode, rng)

    def test_explicit_columns_must_cover_features(self, sbm_graph):
        with pytest.raises(PartitionError):
            VerticalPartition.from_columns(sbm_graph, [[0, 1], [2, 3]])


def test_split_is_stratified_and_disjoint(sbm_graph, rng):
    split = make_split(sbm_graph, rng, per_class_train=4, val_size=5, test_size=10)
    labels = sbm_graph.labels[split.train_index]
    assert (labels == 0).sum() == 4 and (labels == 1).sum() == 4
    assert len(split.val) == 5 and len(split.test) == 10
    assert not (set(split.train) | set(split.val)) & set(split.test)


def test_split_too_large(sbm_graph, rng):
    with pytest.raises(PartitionError):
        make_split(sbm_graph, rng, per_class_train=4, val_size=20, test_size=20)


def test_synth_sbm_is_reproducible():
    a = synth_sbm([5, 7], 0.6, 0.1, 4, SeededRng(1))
    b = synth_sbm([5, 7], 0.6, 0.1, 4, SeededRng(1))
    assert a.adjacency.equals(b.adjacency)
    assert torch.equal(a.features, b.features)
    assert a.labels.tolist() == [0] * 5 + [1] * 7


def test_normalized_entries_lie_in_the_unit_interval(sbm_graph):
    values = normalize(sbm_graph.adjacency).values
    assert bool((values > 0).all()) and bool((values <= 1).all())


def test_synth_sbm_with_certain_blocks_gives_two_triangles():
    graph = synth_sbm([3, 3], 1.0, 0.0, 2, SeededRng(5))
    assert sorted(graph.adjacency.edge_pairs()) == [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]


def test_convert_citation_drops_unknown_papers(tmp_path):
    content = tmp_path / "toy.content"
    content.write_text("p1 1 0 1 Theory\np2 0 1 0 Rule_Learning\np3 1 1 0 Theory\n")
    cites = tmp_path / "toy.cites"
    cites.write_text("p1 p2\np2 p3\np9 p1\n")
    summary = convert_citation(content, cites, tmp_path / "out")
    assert (summary.nodes, summary.edges_written, summary.edges_dropped, summary.features) == (3, 2, 1, 3)

    out = tmp_path / "out"
    graph = load_graph(out / EDGES_FILE, out / FEATURES_FILE, out / LABELS_FILE)
    assert graph.adjacency.edge_pairs() == [(0, 1), (1, 2)]
    assert np.array_equal(graph.features.numpy(), np.array([[1, 0, 1], [0, 1, 0], [1, 1, 0]], dtype=float))
    assert graph.label_names == ("Rule_Learning", "Theory")
