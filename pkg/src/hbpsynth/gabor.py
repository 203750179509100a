"""Fixed multi-directional Gabor filter banks and the residual texture layer.

Each kernel evaluates ``exp(-(x'^2 + g^2 y'^2) / (2 s^2)) * cos(2 pi x' / L + p)``
on a grid centered at the kernel midpoint, with ``x' = x cos(t) + y sin(t)``
and ``y' = -x sin(t) + y cos(t)`` (x runs along columns, y along rows).
Kernels are mean-subtracted (zero response to constants) and L2-normalized.
The bank itself carries no gradient; only the 1x1 recombination weights learn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, affine, conv2d, pad_edge, reshape


class GaborConfigError(ValueError):
    """Raised for invalid Gabor parametrizations."""


@dataclass(frozen=True)
class GaborParams:
    """Bank parametrization: wavelength and envelope in pixels, angles in
    radians within [0, pi), odd kernel size."""

    wavelength: float = 4.0
    orientations: tuple[float, ...] = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
    phase: float = 0.0
    sigma: float = 2.0
    aspect: float = 0.5
    size: int = 3

    def validate(self) -> None:
        if self.size < 1 or self.size % 2 == 0:
            raise GaborConfigError(f"kernel size must be odd and positive, got {self.size}")
        if self.wavelength <= 0 or self.sigma <= 0 or self.aspect <= 0:
            raise GaborConfigError("wavelength, sigma and aspect must all be positive")
        if not self.orientations:
            raise GaborConfigError("need at least one orientation")
        angles = [a % math.pi for a in self.orientations]
        if len(set(np.round(angles, 12))) != len(angles):
            raise GaborConfigError(f"orientations must be distinct mod pi: {self.orientations}")
        if any(a < 0 or a >= math.pi for a in self.orientations):
            raise GaborConfigError(f"orientations must lie in [0, pi): {self.orientations}")

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "orientations": list(self.orientations),
            "phase": self.phase,
            "sigma": self.sigma,
            "aspect": self.aspect,
            "size": self.size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaborParams":
        return cls(
            wavelength=float(d["wavelength"]),
            orientations=tuple(float(a) for a in d["orientations"]),
            phase=float(d["phase"]),
            sigma=float(d["sigma"]),
            aspect=float(d["aspect"]),
            size=int(d["size"]),
        )


def gabor_kernel(params: GaborParams, theta: float, normalized: bool = True) -> np.ndarray:
    """One k x k kernel at orientation ``theta``."""
    half = params.size // 2
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    xr = xs * math.cos(theta) + ys * math.sin(theta)
    yr = -xs * math.sin(theta) + ys * math.cos(theta)
    envelope = np.exp(-(xr ** 2 + (params.aspect ** 2) * yr ** 2) / (2.0 * params.sigma ** 2))
    carrier = np.cos(2.0 * math.pi * xr / params.wavelength + params.phase)
    kern = envelope * carrier
    if not normalized:
        return kern
    kern = kern - kern.mean()
    norm = np.linalg.norm(kern)
    if norm < 1e-12:
        raise GaborConfigError(
            f"degenerate kernel (zero after mean subtraction) at theta={theta}")
    return kern / norm


def gabor_bank(params: GaborParams) -> np.ndarray:
    """Kernel stack [n_orient, 1, k, k], mean-free and unit-norm per kernel."""
    params.validate()
    kernels = [gabor_kernel(params, theta) for theta in params.orientations]
    return np.stack(kernels)[:, None, :, :]


def gabor_layer(x: Tensor, bank: np.ndarray, mix_weight: Tensor) -> Tensor:
    """Residual texture layer: depthwise filtering of every channel by every
    bank orientation, recombined to C channels by a learned bias-free 1x1
    convolution, added back onto the input.

    ``mix_weight`` is the 1x1 weight of shape [C, C*n_orient, 1, 1], response
    channels ordered channel-major (all orientations of input channel 0
    first).  Filtering uses edge-replicate padding so constant inputs produce
    zero responses everywhere, borders included.  Because both stages are
    linear, they are evaluated as a single fused k x k convolution whose
    kernel is the bank contracted with the mix weight; gradients reach the
    mix weight and the input only.
    """
    if x.data.ndim != 4:
        raise GaborConfigError(f"gabor_layer expects [N,C,H,W] input, got {x.shape}")
    n_orient, _, k, _ = bank.shape
    c = x.shape[1]
    if mix_weight.shape != (c, c * n_orient, 1, 1):
        raise GaborConfigError(
            f"mix weight shape {mix_weight.shape} incompatible with C={c}, "
            f"n_orient={n_orient}; expected {(c, c * n_orient, 1, 1)}")
    bank_flat = bank.reshape(n_orient, k * k)
    mix2 = reshape(mix_weight, (c * c, n_orient))
    fused_flat = affine(mix2, Tensor(bank_flat.T), Tensor(np.zeros(k * k)))
    fused = reshape(fused_flat, (c, c, k, k))
    padded = pad_edge(x, (k - 1) // 2)
    return add(conv2d(padded, fused, stride=1, padding=0), x)
