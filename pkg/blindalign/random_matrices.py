import numpy as np
from typing import Tuple, Union

Shape = Union[int, Tuple[int, ...]]

PLAN_STREAM = 0   # Phi and template symbols
TRIAL_STREAM = 1  # per-trial channels, symbols and noise


class ComplexGaussianGenerator:
    """Reproducible unit-variance circularly symmetric complex normal draws"""

    def __init__(self, seed: int, stream: int = PLAN_STREAM):
        self.seed = seed
        self.stream = stream
        self.rng = np.random.default_rng(seed if stream == PLAN_STREAM else [stream, seed])

    def matrix(self, shape: Shape) -> np.ndarray:
        # real and imaginary parts N(0, 1/2) each
        real = self.rng.standard_normal(shape)
        imag = self.rng.standard_normal(shape)
        return (real + 1j * imag) / np.sqrt(2.0)

    def integers(self, low: int, high: int) -> int:
        return int(self.rng.integers(low, high))

    def choice(self, population: int, size: int) -> np.ndarray:
        return self.rng.choice(population, size=size, replace=False)


def as_generator(source: Union[int, ComplexGaussianGenerator]) -> ComplexGaussianGenerator:
    if isinstance(source, ComplexGaussianGenerator):
        return source
    return ComplexGaussianGenerator(source)
