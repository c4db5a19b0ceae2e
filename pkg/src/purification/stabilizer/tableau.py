"""Stabilizer tableau for pure n-qubit states."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import _kernels as K
from .cliffords import WORD_CODES, check_index
from .pauli import Basis, PauliString


class Tableau:
    """Destabilizer/stabilizer generators of a pure stabilizer state.

    Gates mutate the tableau in place and return ``self`` so calls chain.

    Examples:
        >>> t = Tableau(2).h(0).cnot(0, 1)
        >>> [str(g) for g in t.stabilizers()]
        ['+XX', '+ZZ']
    """

    __slots__ = ("n", "xs", "zs", "rs", "smask")

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"a tableau needs at least one qubit, got n={n}")
        self.n = n
        words = (2 * n + 63) // 64
        self.xs = np.zeros((n, words), dtype=np.uint64)
        self.zs = np.zeros((n, words), dtype=np.uint64)
        self.rs = np.zeros(words, dtype=np.uint64)
        for q in range(n):
            self.xs[q, q >> 6] |= np.uint64(1) << np.uint64(q & 63)
            r = n + q
            self.zs[q, r >> 6] |= np.uint64(1) << np.uint64(r & 63)
        self.smask = K.row_mask(n, n, 2 * n)

    # ------------------------------------------------------------ plumbing

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.xs = self.xs.copy()
        t.zs = self.zs.copy()
        t.rs = self.rs.copy()
        t.smask = self.smask
        return t

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tableau):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.zs, other.zs)
            and np.array_equal(self.rs, other.rs)
        )

    def _check_qubit(self, *qs: int) -> None:
        for q in qs:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for {self.n} qubits")

    def _row(self, r: int) -> PauliString:
        w, b = r >> 6, np.uint64(r & 63)
        x = tuple(int((self.xs[j, w] >> b) & np.uint64(1)) for j in range(self.n))
        z = tuple(int((self.zs[j, w] >> b) & np.uint64(1)) for j in range(self.n))
        sign = -1 if (self.rs[w] >> b) & np.uint64(1) else 1
        return PauliString(x, z, sign)

    def stabilizers(self) -> list[PauliString]:
        return [self._row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self._row(i) for i in range(self.n)]

    def bit_matrix(self) -> np.ndarray:
        """(2n, 2n) uint8 matrix ``[x | z]``; destabilizers first."""
        rows = np.arange(2 * self.n)
        words = self.xs[:, rows >> 6]
        shifts = (rows & 63).astype(np.uint64)
        x = ((words >> shifts) & np.uint64(1)).astype(np.uint8).T
        z = ((self.zs[:, rows >> 6] >> shifts) & np.uint64(1)).astype(np.uint8).T
        return np.concatenate([x, z], axis=1)

    def __repr__(self) -> str:
        return f"Tableau(n={self.n}, stabilizers={[str(s) for s in self.stabilizers()]})"

    # ------------------------------------------------------------ gates

    def h(self, q: int) -> "Tableau":
        self._check_qubit(q)
        K.h(self.xs, self.zs, self.rs, q)
        return self

    def s(self, q: int) -> "Tableau":
        self._check_qubit(q)
        K.s(self.xs, self.zs, self.rs, q)
        return self

    def sdg(self, q: int) -> "Tableau":
        self._check_qubit(q)
        K.sdg(self.xs, self.zs, self.rs, q)
        return self

    def x(self, q: int) -> "Tableau":
        self._check_qubit(q)
        K.pauli_x(self.xs, self.zs, self.rs, q)
        return self

    def z(self, q: int) -> "Tableau":
        self._check_qubit(q)
        K.pauli_z(self.xs, self.zs, self.rs, q)
        return self

    def clifford_1q(self, q: int, idx: int) -> "Tableau":
        self._check_qubit(q)
        check_index(idx)
        K.clifford_1q(self.xs, self.zs, self.rs, q, WORD_CODES[idx])
        return self

    def cnot(self, control: int, target: int) -> "Tableau":
        self._check_qubit(control, target)
        if control == target:
            raise ValueError("CNOT control and target must differ")
        K.cnot(self.xs, self.zs, self.rs, control, target)
        return self

    def xx_pi4(self, a: int, b: int) -> "Tableau":
        """Conjugate by exp(-i pi/4 X_a X_b) (global phase dropped)."""
        self._check_qubit(a, b)
        if a == b:
            raise ValueError("XX gate needs two distinct qubits")
        K.xx_pi4(self.xs, self.zs, self.rs, a, b)
        return self

    def to_z_basis(self, q: int, basis: Basis | str) -> "Tableau":
        """Rotate qubit ``q`` so that ``basis`` eigenstates map to Z eigenstates."""
        self._check_qubit(q)
        K.to_z_basis(self.xs, self.zs, self.rs, q, int(Basis.parse(basis)))
        return self

    def from_z_basis(self, q: int, basis: Basis | str) -> "Tableau":
        self._check_qubit(q)
        K.from_z_basis(self.xs, self.zs, self.rs, q, int(Basis.parse(basis)))
        return self

    # ------------------------------------------------------------ measurement

    def is_deterministic(self, q: int, basis: Basis | str) -> bool:
        self._check_qubit(q)
        return bool(K.is_deterministic(self.xs, self.zs, self.smask, q, int(Basis.parse(basis))))

    def measure(
        self,
        q: int,
        basis: Basis | str = Basis.Z,
        rng: np.random.Generator | None = None,
        force: int | None = None,
    ) -> tuple[int, bool]:
        """Projectively measure qubit ``q`` in ``basis``.

        A random outcome is drawn lazily from ``rng`` (one uniform) only when
        the result is not already fixed; ``force`` post-selects it instead.

        Returns:
            ``(outcome, deterministic)``.

        Raises:
            ValueError: ``force`` contradicts a deterministic outcome.
        """
        self._check_qubit(q)
        b = int(Basis.parse(basis))
        if K.is_deterministic(self.xs, self.zs, self.smask, q, b):
            K.to_z_basis(self.xs, self.zs, self.rs, q, b)
            out = int(K.deterministic_z_outcome(self.xs, self.zs, self.rs, self.n, q))
            K.from_z_basis(self.xs, self.zs, self.rs, q, b)
            if force is not None and force != out:
                raise ValueError(f"outcome {out} on qubit {q} is deterministic")
            return out, True
        if force is not None:
            out = int(force)
        elif rng is not None:
            out = 1 if rng.random() >= 0.5 else 0
        else:
            raise ValueError("random measurement needs an rng or a forced outcome")
        K.measure(self.xs, self.zs, self.rs, self.n, q, b, out)
        return out, False

    def expectation(self, pauli: PauliString | str) -> int:
        """Return +1/-1 if +-pauli is in the stabilizer group, else 0."""
        if isinstance(pauli, str):
            pauli = PauliString.from_str(pauli)
        if pauli.n > self.n:
            raise ValueError(f"{pauli.n}-qubit Pauli on a {self.n}-qubit tableau")
        px, pz = pauli.padded(self.n).bits()
        present, sign = K.expectation(self.xs, self.zs, self.rs, self.n, px, pz)
        if not present:
            return 0
        return pauli.sign * (-1 if sign else 1)

    def bloch(self, q: int) -> tuple[int, int, int]:
        """Single-qubit Pauli expectations (<X>, <Y>, <Z>) on ``q``."""
        self._check_qubit(q)
        return tuple(self.expectation(PauliString.single(self.n, q, b)) for b in "XYZ")

    # ------------------------------------------------------------ entropy

    def entropy(self, subset: Iterable[int]) -> int:
        """Entanglement entropy (bits) of ``subset`` with its complement.

        Computed as rank(stabilizers restricted to the complement) minus the
        complement size, which equals |A| - log2 |G_A|.
        """
        A = sorted(set(int(q) for q in subset))
        if not A:
            raise ValueError("subsystem must be non-empty")
        self._check_qubit(*A)
        if len(A) == 1:
            return int(K.single_qubit_entropy(self.xs, self.zs, self.smask, A[0]))
        comp = [q for q in range(self.n) if q not in set(A)]
        if not comp:
            return 0
        m = self.bit_matrix()[self.n :]
        cols = comp + [self.n + q for q in comp]
        rank = K.gf2_rank(np.ascontiguousarray(m[:, cols]))
        return int(rank - len(comp))

    def entropy_by_rank(self, subset: Iterable[int]) -> int:
        """Same as :meth:`entropy` but always through Gaussian elimination."""
        A = set(int(q) for q in subset)
        if not A:
            raise ValueError("subsystem must be non-empty")
        comp = [q for q in range(self.n) if q not in A]
        if not comp:
            return 0
        m = self.bit_matrix()[self.n :]
        cols = comp + [self.n + q for q in comp]
        return int(K.gf2_rank(np.ascontiguousarray(m[:, cols])) - len(comp))


def new_tableau(n: int) -> Tableau:
    return Tableau(n)


def audit(t: Tableau) -> None:
    """Raise AssertionError unless the generator commutation structure is intact."""
    m = t.bit_matrix().astype(np.int64)
    n = t.n
    x, z = m[:, :n], m[:, n:]
    gram = (x @ z.T + z @ x.T) % 2
    expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
    expected[:n, n:] = np.eye(n, dtype=np.int64)
    expected[n:, :n] = np.eye(n, dtype=np.int64)
    if not np.array_equal(gram, expected):
        bad = np.argwhere(gram != expected)[:5].tolist()
        raise AssertionError(f"tableau commutation structure broken at rows {bad}")
    if t.xs.shape[1] * 64 > 2 * n:
        # padding bits past row 2n must stay clear
        pad = ~K.row_mask(n, 0, 2 * n)
        if (t.xs & pad).any() or (t.zs & pad).any() or (t.rs & pad).any():
            raise AssertionError("padding bits set")
