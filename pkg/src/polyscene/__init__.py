"""polyscene: random polyhedral scenes, deterministic rendering, datasets
and an on-demand render API."""

__version__ = "0.1.0"
