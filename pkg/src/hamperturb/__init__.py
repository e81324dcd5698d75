"""Hamilton cycles in randomly perturbed graphs: constructions, oracles and experiments."""

__version__ = "0.1.0"
