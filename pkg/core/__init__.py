"""
HessCraft - Core Differentiation Module
Tape recording, reverse gradients and sparse Hessians by edge pushing,
with lazy loading so the CLI starts without importing scipy/networkx
"""

__version__ = "1.0.0"


def __getattr__(name):
    """Lazy import for core modules - loads on first access."""
    if name in ("Tape", "TapeBuilder", "record", "forward_sweep", "dumps", "loads"):
        from . import tape

        return getattr(tape, name)
    elif name in ("AdjointVector", "GradientResult", "gradient"):
        from .reverse_gradient import AdjointVector, GradientResult, reverse_gradient

        return {"AdjointVector": AdjointVector, "GradientResult": GradientResult, "gradient": reverse_gradient}[name]
    elif name in ("edge_pushing_hessian", "structural_pattern", "SparseHessian", "EdgePushingStats"):
        from . import edge_pushing

        return getattr(edge_pushing, name)
    elif name in ("dense_hessian_nested", "fd_hessian", "fd_gradient", "hessian_vector_product"):
        from . import oracles

        return getattr(oracles, name)
    elif name in ("build_folded_graph", "path_enumeration_hessian", "export_dot"):
        from . import graph_model

        return getattr(graph_model, name)
    else:
        raise AttributeError(f"module 'core' has no attribute '{name}'")
