from .mechanisms import DefenseConfig, DefenseKind, UploadDefense, dp_perturb, topk_filter, topk_mask

__all__ = ["DefenseConfig", "DefenseKind", "UploadDefense", "dp_perturb", "topk_filter", "topk_mask"]
