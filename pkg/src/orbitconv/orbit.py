"""Kernel orbits: transformed copies of one shared base kernel.

An orbit is an ordered list of invertible spatial permutations, identity first.
``expand_orbit`` applies them to a base kernel; ``transport_back`` is its
adjoint and carries per-member gradients back to the shared parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from orbitconv.tensor import flip, rot45_ring, rot90

Fn = Callable[[np.ndarray], np.ndarray]


def _ident(k):
    return np.array(k, copy=True)


def _rot(n):
    return lambda k: rot90(k, n)


def _ring(n):
    return lambda k: rot45_ring(k, n)


def _h(k):
    return flip(k, "h")


def _v(k):
    return flip(k, "v")


def _hv(k):
    return flip(flip(k, "h"), "v")


def _rot_h(n):
    return lambda k: rot90(flip(k, "h"), n)


def _unrot_h(n):
    return lambda k: flip(rot90(k, -n), "h")


# name -> (kind, [(label, forward, inverse), ...])
_ORBITS: dict[str, tuple[str, list[tuple[str, Fn, Fn]]]] = {
    "id": ("identity", [("id", _ident, _ident)]),
    "rot2": ("rotation", [("rot0", _ident, _ident), ("rot180", _rot(2), _rot(2))]),
    "rot4": ("rotation", [(f"rot{90 * n}", _rot(n), _rot(-n)) for n in range(4)]),
    "rot8": ("rotation", [(f"rot{45 * n}", _ring(n), _ring(-n)) for n in range(8)]),
    "flip3": ("flip", [("id", _ident, _ident), ("hflip", _h, _h), ("vflip", _v, _v)]),
    "flip4": (
        "flip",
        [("id", _ident, _ident), ("hflip", _h, _h), ("vflip", _v, _v), ("hvflip", _hv, _hv)],
    ),
    # full dihedral group of the square: rot^n, then rot^n after hflip
    "d4": (
        "dihedral",
        [(f"rot{90 * n}", _rot(n), _rot(-n)) for n in range(4)]
        + [(f"rot{90 * n}.hflip", _rot_h(n), _unrot_h(n)) for n in range(4)],
    ),
}

ORBIT_NAMES = tuple(_ORBITS)

# transforms usable as the external group element in closure_table
GROUP_ELEMENTS: dict[str, Fn] = {
    "rot90": _rot(1),
    "rot180": _rot(2),
    "rot270": _rot(3),
    "hflip": _h,
    "vflip": _v,
}


@dataclass(frozen=True)
class OrbitSpec:
    """Which transforms make up a kernel orbit, in enumeration order.

    ``name`` is one of ``rot2 | rot4 | rot8 | flip3 | flip4``, plus ``id`` (the
    degenerate one-member orbit) and ``d4`` (all eight square symmetries).
    """

    name: str

    def __post_init__(self):
        if self.name not in _ORBITS:
            raise ValueError(f"unknown orbit {self.name!r}; expected one of {ORBIT_NAMES}")

    @property
    def kind(self) -> str:
        return _ORBITS[self.name][0]

    @property
    def labels(self) -> list[str]:
        return [t[0] for t in _ORBITS[self.name][1]]

    @property
    def forwards(self) -> list[Fn]:
        return [t[1] for t in _ORBITS[self.name][1]]

    @property
    def inverses(self) -> list[Fn]:
        return [t[2] for t in _ORBITS[self.name][1]]

    def __len__(self) -> int:
        return len(_ORBITS[self.name][1])

    def check_kernel(self, shape: Sequence[int]) -> None:
        if self.name == "rot8" and tuple(shape[-2:]) != (3, 3):
            raise ValueError(f"rot8 orbit needs 3x3 kernels, got {tuple(shape[-2:])}")
        if self.kind in ("rotation", "dihedral") and shape[-2] != shape[-1]:
            raise ValueError(f"rotation orbits need square kernels, got {tuple(shape[-2:])}")


def expand_orbit(base, spec: OrbitSpec) -> list[np.ndarray]:
    base = np.asarray(base, dtype=np.float64)
    spec.check_kernel(base.shape)
    return [f(base) for f in spec.forwards]


def transport_back(orbit_grads: Sequence[np.ndarray], spec: OrbitSpec) -> np.ndarray:
    """Sum of inverse-transformed member gradients: the gradient w.r.t. the base
    kernel. Summation runs in orbit order."""
    if len(orbit_grads) != len(spec):
        raise ValueError(f"expected {len(spec)} orbit gradients, got {len(orbit_grads)}")
    out = np.zeros_like(np.asarray(orbit_grads[0], dtype=np.float64))
    for g, inv in zip(orbit_grads, spec.inverses):
        out += inv(np.asarray(g, dtype=np.float64))
    return out


def closure_table(spec: OrbitSpec, g: str) -> list[int] | None:
    """Index permutation ``p`` with ``g(member[i]) == member[p[i]]`` for every
    base kernel, or None when the orbit is not closed under ``g``.

    Decided on a kernel with distinct entries, where equality of transformed
    copies is equality of the underlying permutations.
    """
    if g not in GROUP_ELEMENTS:
        raise ValueError(f"unknown group element {g!r}")
    probe = np.arange(9, dtype=np.float64).reshape(3, 3) + 1.0
    members = expand_orbit(probe, spec)
    gf = GROUP_ELEMENTS[g]
    perm = []
    for m in members:
        moved = gf(m)
        hit = [j for j, other in enumerate(members) if np.array_equal(moved, other)]
        if not hit:
            return None
        perm.append(hit[0])
    return perm
