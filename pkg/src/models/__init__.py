from .checkpoint import load_params, read_params, save_params
from .local_gnn import LocalModel, ModelKind, forward, grad_wrt_adjacency, local_step
from .server import ServerModel

__all__ = [
    "load_params",
    "read_params",
    "save_params",
    "LocalModel",
    "ModelKind",
    "forward",
    "grad_wrt_adjacency",
    "local_step",
    "ServerModel",
]
