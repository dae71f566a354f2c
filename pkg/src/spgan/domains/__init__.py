"""Built-in experiment domains."""
from .base import Domain, SequenceDomain
from .brackets import BracketSample, BracketsDomain, brackets_dataset, brackets_semantic_functions
from .lines import LineSample, LinesDomain, lines_dataset, lines_semantic_functions
from .points2d import Point2DSample, Points2DDomain, points2d_dataset, points2d_semantic_functions

DOMAINS = {
    "lines": LinesDomain,
    "brackets": BracketsDomain,
    "points2d": Points2DDomain,
}


def build_domain(name: str, params: dict, seed: int):
    """Instantiate a registered domain; ``seed`` fixes its actual data."""
    if name not in DOMAINS:
        raise KeyError(name)
    return DOMAINS[name](**params, seed=seed)


__all__ = [
    "DOMAINS", "Domain", "SequenceDomain", "build_domain",
    "LineSample", "LinesDomain", "lines_dataset", "lines_semantic_functions",
    "BracketSample", "BracketsDomain", "brackets_dataset", "brackets_semantic_functions",
    "Point2DSample", "Points2DDomain", "points2d_dataset", "points2d_semantic_functions",
]
