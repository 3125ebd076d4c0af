"""Convolution layers with trainable parameters.

``InvariantConvLayer`` convolves with every member of a kernel orbit generated
from one shared base kernel (plus one shared bias per base channel), then
either concatenates the member responses or pools them with maxout.

``forward``/``backward`` take N x C x H x W arrays. The ``*_cnhw`` variants are
the same computation on channel-major C x N x H x W arrays, which is the layout
the network keeps between layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from orbitconv.conv import (
    conv_backward_cnhw,
    conv_cnhw,
    maxout_backward,
    maxout_forward,
    to_cnhw,
    to_nchw,
)
from orbitconv.orbit import OrbitSpec, expand_orbit, transport_back

COMBINES = ("concat", "maxout")


class _NCHWMixin:
    def forward(self, x):
        y, cache = self.forward_cnhw(to_cnhw(x))
        return to_nchw(y), cache

    def backward(self, cache, dy, need_dx: bool = True):
        dx, grads = self.backward_cnhw(cache, to_cnhw(dy), need_dx)
        return (None if dx is None else to_nchw(dx)), grads


@dataclass
class PlainConvLayer(_NCHWMixin):
    weight: np.ndarray  # Cout x Cin x kH x kW
    bias: np.ndarray
    padding: str = "same"

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def forward_cnhw(self, xc):
        y, cols = conv_cnhw(xc, self.weight, self.bias, self.padding)
        return y, (cols, xc.shape)

    def backward_cnhw(self, cache, dyc, need_dx: bool = True):
        cols, x_shape = cache
        dx, dw, db = conv_backward_cnhw(cols, x_shape, self.weight, dyc, self.padding, need_dx)
        return dx, {"weight": dw, "bias": db}


@dataclass
class InvariantConvLayer(_NCHWMixin):
    """Shared-kernel orbit convolution.

    In ``concat`` mode the output has ``C_base * len(orbit)`` channels grouped by
    orbit member (member 0's channels first). In ``maxout`` mode it has
    ``C_base`` channels, each the elementwise max over the orbit responses.
    """

    base_kernel: np.ndarray  # C_base x Cin x kH x kW
    bias: np.ndarray  # C_base
    orbit: OrbitSpec
    combine: str = "maxout"
    padding: str = "same"

    def __post_init__(self):
        if self.combine not in COMBINES:
            raise ValueError(f"combine must be one of {COMBINES}, got {self.combine!r}")
        if isinstance(self.orbit, str):
            self.orbit = OrbitSpec(self.orbit)
        self.orbit.check_kernel(self.base_kernel.shape)

    @property
    def in_channels(self) -> int:
        return self.base_kernel.shape[1]

    @property
    def base_channels(self) -> int:
        return self.base_kernel.shape[0]

    @property
    def out_channels(self) -> int:
        if self.combine == "concat":
            return self.base_channels * len(self.orbit)
        return self.base_channels

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.base_kernel, "bias": self.bias}

    def stacked_kernel(self) -> np.ndarray:
        return np.concatenate(expand_orbit(self.base_kernel, self.orbit), axis=0)

    def forward_cnhw(self, xc):
        m, c = len(self.orbit), self.base_channels
        y, cols = conv_cnhw(xc, self.stacked_kernel(), np.tile(self.bias, m), self.padding)
        if self.combine == "concat":
            return y, (cols, xc.shape, None)
        # channel-major output splits into orbit groups without copying
        pooled, routing = maxout_forward(y.reshape(m, c, *y.shape[1:]))
        return pooled, (cols, xc.shape, routing)

    def backward_cnhw(self, cache, dyc, need_dx: bool = True):
        """Returns ``(dx, {"weight": d_base_kernel, "bias": d_bias})``."""
        cols, x_shape, routing = cache
        m, c = len(self.orbit), self.base_channels
        if self.combine == "maxout":
            if routing is None or routing.shape != dyc.shape:
                raise ValueError(f"dy shape {dyc.shape} does not match cached forward output")
            dyc = maxout_backward(dyc, routing, m).reshape(m * c, *dyc.shape[1:])
        dx, dw, db = conv_backward_cnhw(cols, x_shape, self.stacked_kernel(), dyc, self.padding, need_dx)
        d_base = transport_back(np.split(dw, m, axis=0), self.orbit)
        d_bias = np.zeros(c)
        for part in db.reshape(m, c):
            d_bias += part
        return dx, {"weight": d_base, "bias": d_bias}


def param_count(layer) -> int:
    """Trainable scalars (weights + biases). Orbit size does not enter."""
    return int(sum(p.size for p in layer.params().values()))


def plain_conv(cin: int, cout: int, k: int = 3, padding: str = "same") -> PlainConvLayer:
    """Zero-initialised plain layer, mostly for parameter accounting."""
    return PlainConvLayer(np.zeros((cout, cin, k, k)), np.zeros(cout), padding)


def invariant_conv(cin: int, c_base: int, orbit: str, combine: str = "maxout", k: int = 3) -> InvariantConvLayer:
    return InvariantConvLayer(np.zeros((c_base, cin, k, k)), np.zeros(c_base), OrbitSpec(orbit), combine)
