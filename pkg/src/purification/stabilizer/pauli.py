from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Basis(IntEnum):
    """Single-qubit measurement basis.  Values are the kernel codes."""

    X = 0
    Y = 1
    Z = 2

    @classmethod
    def parse(cls, value: "Basis | str | int") -> "Basis":
        if isinstance(value, Basis):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown basis {value!r}") from None
        return cls(int(value))


_CHAR = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _CHAR.items()}


@dataclass(frozen=True)
class PauliString:
    """Signed n-qubit Pauli operator stored as x/z bit vectors.

    Qubit ``q`` carries I, X, Z, Y for ``(x[q], z[q])`` equal to
    (0,0), (1,0), (0,1), (1,1).  Only Hermitian operators are represented,
    so the sign is +1 or -1.
    """

    x: tuple[int, ...]
    z: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z bit vectors differ in length")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if any(b not in (0, 1) for b in self.x + self.z):
            raise ValueError("bit vectors must contain only 0/1")

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        """Parse ``"+XIZ"``, ``"-YY"`` or ``"ZZ"`` (qubit 0 first)."""
        text = text.strip()
        sign = 1
        if text and text[0] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        try:
            bits = [_BITS[ch] for ch in text.upper().replace("_", "I")]
        except KeyError as exc:
            raise ValueError(f"bad Pauli character {exc.args[0]!r}") from None
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), sign)

    @classmethod
    def single(cls, n: int, q: int, basis: "Basis | str") -> "PauliString":
        """The basis Pauli acting on qubit ``q`` of ``n``."""
        basis = Basis.parse(basis)
        x = [0] * n
        z = [0] * n
        x[q] = int(basis in (Basis.X, Basis.Y))
        z[q] = int(basis in (Basis.Z, Basis.Y))
        return cls(tuple(x), tuple(z))

    def __str__(self) -> str:
        return ("+" if self.sign > 0 else "-") + "".join(
            _CHAR[b] for b in zip(self.x, self.z)
        )

    def __neg__(self) -> "PauliString":
        return PauliString(self.x, self.z, -self.sign)

    def commutes(self, other: "PauliString") -> bool:
        acc = sum(a & d ^ b & c for a, b, c, d in zip(self.x, self.z, other.x, other.z))
        return acc % 2 == 0

    def padded(self, n: int) -> "PauliString":
        if n < self.n:
            raise ValueError(f"cannot shrink a {self.n}-qubit Pauli to {n} qubits")
        extra = (0,) * (n - self.n)
        return PauliString(self.x + extra, self.z + extra, self.sign)

    def bits(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.x, dtype=np.uint8), np.array(self.z, dtype=np.uint8)

    def matrix(self) -> np.ndarray:
        """Dense matrix in the little-endian convention (qubit 0 = lowest bit)."""
        single = {
            (0, 0): np.eye(2),
            (1, 0): np.array([[0, 1], [1, 0]]),
            (0, 1): np.array([[1, 0], [0, -1]]),
            (1, 1): np.array([[0, -1j], [1j, 0]]),
        }
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(single[(self.x[q], self.z[q])], out)
        return self.sign * out
