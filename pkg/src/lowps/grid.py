"""Rectangular grids in the complex plane."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, PreconditionError

DEFAULT_CAP = 1_000_000


@dataclass(frozen=True)
class GridSpec:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise PreconditionError("grid bounds must satisfy min < max")
        if self.n_re < 1 or self.n_im < 1:
            raise PreconditionError("grid sizes must be positive")
        if self.n_re * self.n_im > self.cap:
            raise CapExceededError(f"grid has {self.n_re * self.n_im} points, cap is {self.cap}")

    @classmethod
    def square(cls, half_width: float, n: int, center: complex = 0.0, cap: int = DEFAULT_CAP) -> "GridSpec":
        c = complex(center)
        return cls(c.real - half_width, c.real + half_width, c.imag - half_width, c.imag + half_width, n, n, cap)

    @property
    def size(self) -> int:
        return self.n_re * self.n_im

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        # a single sample sits at the lower bound
        re = np.linspace(self.re_min, self.re_max, self.n_re)
        im = np.linspace(self.im_min, self.im_max, self.n_im)
        return re, im

    def points(self) -> np.ndarray:
        """Grid points as a flat complex array, real part varying fastest."""
        re, im = self.axes()
        return (re[None, :] + 1j * im[:, None]).ravel()
