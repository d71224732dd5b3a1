"""Weighted Pauli-string operators.

A Pauli string stores one letter per qubit with position ``j`` acting on
qubit ``j``, and qubit ``j`` is bit ``j`` (least significant bit first) of a
computational-basis index. All coefficients are real, so every operator
handled here is Hermitian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

_LETTERS = frozenset("IXYZ")


@dataclass(frozen=True)
class PauliSum:
    """Hermitian operator given as a real-weighted sum of Pauli strings.

    Terms with identical strings are merged on construction and terms whose
    merged coefficient is exactly zero are dropped.
    """

    n_qubits: int
    terms: tuple[tuple[float, str], ...]

    def __init__(self, n_qubits: int, terms: Iterable[tuple[float, str]]):
        if n_qubits < 1:
            raise ValueError(f"need at least one qubit, got {n_qubits}")
        merged: dict[str, float] = {}
        for coeff, string in terms:
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for term {string!r}")
            if len(string) != n_qubits or not set(string) <= _LETTERS:
                raise ValueError(f"bad Pauli string {string!r} for {n_qubits} qubits")
            merged[string] = merged.get(string, 0.0) + coeff
        object.__setattr__(self, "n_qubits", int(n_qubits))
        object.__setattr__(
            self, "terms", tuple((c, s) for s, c in merged.items() if c != 0.0)
        )

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit-count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(self.n_qubits, [(factor * c, s) for c, s in self.terms])

    def norm_scale(self) -> float:
        """Sum of absolute coefficients (an upper bound on the operator norm)."""
        return sum(abs(c) for c, _ in self.terms)

    def to_text(self) -> str:
        """Line-oriented form, one ``coeff pauli-string`` per line."""
        return "\n".join(f"{c:.17g} {s}" for c, s in self.terms) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        terms = []
        n = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            coeff, string = line.split()
            if n is None:
                n = len(string)
            terms.append((float(coeff), string))
        if n is None:
            raise ValueError("empty operator text")
        return cls(n, terms)

    def to_dense(self) -> np.ndarray:
        """Materialize the full 2^n x 2^n matrix.

        Returns a real float64 matrix when every entry is real (no term with
        an odd number of Y letters), complex128 otherwise. Intended for
        oracle-style uses only; circuit evolution never calls this.
        """
        dim = 1 << self.n_qubits
        real = all(s.count("Y") % 2 == 0 for _, s in self.terms)
        out = np.zeros((dim, dim), dtype=np.float64 if real else np.complex128)
        cols = np.arange(dim, dtype=np.int64)
        for coeff, string in self.terms:
            xmask, zmask, ny = term_masks(string)
            phase = 1j**ny
            vals = coeff * phase * _parity_signs(self.n_qubits, zmask)
            if real:
                vals = vals.real
            np.add.at(out, (cols ^ xmask, cols), vals)
        return out


def term_masks(string: str) -> tuple[int, int, int]:
    """Bit masks (xmask, zmask, y_count) for one Pauli string.

    The operator acts on a basis state as
    ``P|b> = i^y_count * (-1)^parity(b & zmask) |b ^ xmask>``.
    """
    xmask = zmask = ny = 0
    for j, letter in enumerate(string):
        if letter == "X":
            xmask |= 1 << j
        elif letter == "Z":
            zmask |= 1 << j
        elif letter == "Y":
            xmask |= 1 << j
            zmask |= 1 << j
            ny += 1
    return xmask, zmask, ny


@lru_cache(maxsize=512)
def _parity_signs(n_qubits: int, zmask: int) -> np.ndarray:
    """(-1)^parity(idx & zmask) over all basis indices, as int8."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    par = (np.bitwise_count(idx & zmask) & 1).astype(np.int8)
    signs = (1 - 2 * par).astype(np.int8)
    signs.setflags(write=False)
    return signs


def single_site(n_qubits: int, site: int, letter: str, coeff: float = 1.0) -> tuple[float, str]:
    chars = ["I"] * n_qubits
    chars[site] = letter
    return (coeff, "".join(chars))


def two_site(
    n_qubits: int, site_a: int, site_b: int, letter: str, coeff: float = 1.0
) -> tuple[float, str]:
    if site_a == site_b:
        raise ValueError("two-site term needs distinct sites")
    chars = ["I"] * n_qubits
    chars[site_a] = letter
    chars[site_b] = letter
    return (coeff, "".join(chars))
