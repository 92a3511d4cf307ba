from .convert import EDGES_FILE, FEATURES_FILE, LABELS_FILE, convert_citation
from .partition import PartitionMode, SplitSpec, VerticalPartition, make_split, partition
from .store import Graph, load_graph, normalize
from .synth import synth_sbm

__all__ = [
    "EDGES_FILE",
    "FEATURES_FILE",
    "LABELS_FILE",
    "convert_citation",
    "PartitionMode",
    "SplitSpec",
    "VerticalPartition",
    "make_split",
    "partition",
    "Graph",
    "load_graph",
    "normalize",
    "synth_sbm",
]
