"""Shared behaviour for the weight containers of the recurrent models."""
from dataclasses import dataclass
from typing import ClassVar, Dict, Tuple

import numpy as np


@dataclass(eq=False)
class ParamSet:
    """Base for a fixed, named collection of float64 weight arrays.

    Subclasses declare ``kind``, ``names`` (field order, which is also the
    checkpoint order) and implement :meth:`expected_shapes`.
    """

    kind: ClassVar[str] = ""
    names: ClassVar[Tuple[str, ...]] = ()

    def __post_init__(self):
        for name in self.names:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{self.kind} parameter {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        expected = self.expected_shapes(*self.dims)
        for name in self.names:
            shape = getattr(self, name).shape
            if shape != expected[name]:
                raise ValueError(
                    f"{self.kind} parameter {name} has shape {shape}, expected {expected[name]}"
                )

    @staticmethod
    def expected_shapes(n, m, p) -> Dict[str, tuple]:
        raise NotImplementedError

    @property
    def dims(self) -> Tuple[int, int, int]:
        """(state size n, input size m, output size p)."""
        raise NotImplementedError

    @property
    def n(self):
        return self.dims[0]

    @property
    def m(self):
        return self.dims[1]

    @property
    def p(self):
        return self.dims[2]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names}

    def with_arrays(self, arrays):
        return type(self)(**{name: arrays.get(name, getattr(self, name)) for name in self.names})

    def copy(self):
        return self.with_arrays({k: v.copy() for k, v in self.arrays().items()})

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays().values()))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in self.names)


def uniform_init(rng, shape, n):
    bound = 1.0 / np.sqrt(n)
    return rng.uniform(-bound, bound, size=shape)


def check_dims(n, m, p):
    for label, value in (("n", n), ("m", m), ("p", p)):
        if int(value) != value or value < 1:
            raise ValueError(f"dimension {label} must be a positive integer, got {value!r}")
    return int(n), int(m), int(p)
