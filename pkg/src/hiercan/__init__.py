"""Hierarchical Cannings models in random environment: dichotomy,
renormalization, duality and simulation."""

from .hiergroup import HierAddress, TreeAddress, distance, ancestor, block_members, tree_distance
from .environment import ChiShape, EnvLaw, EnvSpec, Environment, ParamFamily, validate

__version__ = "0.1.0"

__all__ = ["HierAddress", "TreeAddress", "distance", "ancestor", "block_members", "tree_distance",
           "ChiShape", "EnvLaw", "EnvSpec", "Environment", "ParamFamily", "validate", "__version__"]
