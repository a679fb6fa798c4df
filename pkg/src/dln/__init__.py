"""Wide and compressed deep linear networks for low-rank matrix recovery."""

__version__ = "0.1.0"

from . import baselines, data, diagnostics, linalg, models, operators, theory, trainer

__all__ = [
    "__version__",
    "baselines",
    "data",
    "diagnostics",
    "linalg",
    "models",
    "operators",
    "theory",
    "trainer",
]
