"""Rotation- and flip-invariant convolutions built from shared-kernel orbits."""

from orbitconv.tensor import flip, read_tensor, rot45_ring, rot90, write_tensor
from orbitconv.orbit import OrbitSpec, closure_table, expand_orbit, transport_back
from orbitconv.layers import InvariantConvLayer, PlainConvLayer, param_count

__all__ = [
    "flip",
    "rot90",
    "rot45_ring",
    "read_tensor",
    "write_tensor",
    "OrbitSpec",
    "expand_orbit",
    "transport_back",
    "closure_table",
    "InvariantConvLayer",
    "PlainConvLayer",
    "param_count",
]
