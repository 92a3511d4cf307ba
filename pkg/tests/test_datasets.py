"""End-to-end checks on the converted citation datasets under GVFL_DATA_DIR."""
import pytest

from src.config import settings
from src.experiment import load_dataset, run_scenario, validate_config
from src.graph import EDGES_FILE


def dataset_dir(name):
    root = settings.data_dir / name
    if not (root / EDGES_FILE).is_file():
        pytest.skip(f"dataset {name} not found under {settings.data_dir}")
    return root


@pytest.mark.slow
@pytest.mark.parametrize("name, nodes, raw_edges, features, classes", [
    ("cora", 2708, 5429, 1433, 7),
    ("citeseer", 3312, 4732, 3703, 6),
])
def test_published_statistics(name, nodes, raw_edges, features, classes):
    root = dataset_dir(name)
    config = validate_config({"dataset": {"name": name, "path": str(root)}})
    graph = load_dataset(config.dataset)
    assert (graph.n, graph.num_features, graph.num_classes) == (nodes, features, classes)
    # Lines in the edge file; duplicates and reversed pairs collapse in the adjacency.
    assert graph.raw_edge_count <= raw_edges
    assert graph.num_edges <= graph.raw_edge_count


@pytest.mark.slow
def test_cora_gcn_clean_and_attacked_accuracy(tmp_path):
    root = dataset_dir("cora")
    config = validate_config({
        "name": "cora-gcn",
        "seeds": list(range(10)),
        "output_dir": str(tmp_path),
        "dataset": {"name": "cora", "path": str(root)},
        "attack": {"method": "fraudster", "budget": 1, "evaluate_test_nodes": False},
    })
    result = run_scenario(config, jobs=settings.jobs)
    table = {row.metric: row for row in result.table}
    assert table["accuracy_test"].mean == pytest.approx(0.719, abs=0.05)
    assert table["attacked_accuracy_targets"].mean == pytest.approx(0.435, abs=0.10)
    assert table["shadow_agreement"].mean >= 0.8
    for record in result.records:
        grn = record.attack.grn_loss
        assert grn[-1] <= 0.25 * grn[0]
