__all__ = [
    "analysis",
    "attacks",
    "cli",
    "config",
    "dataset",
    "engine",
    "errors",
    "images",
    "models",
    "oracle",
    "perturbation",
    "pipeline",
    "utils",
]
