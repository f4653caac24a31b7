"""
Fermionic ladder operators acting on occupation bit strings.

A state is an int whose bit q is set when orbital q is occupied. The
determinant with orbitals q1 < q2 < ... < qN is c†_{q1} c†_{q2} ... c†_{qN}|0>,
so c_q and c†_q pick up (-1)**(number of occupied orbitals below q).
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional, Sequence

from sympy.combinatorics.permutations import Permutation

# (dagger, orbital index)
LadderOp = tuple[bool, int]
OperatorTerm = tuple[complex, tuple[LadderOp, ...]]


def bits_from_orbitals(orbitals: Iterable[int]) -> int:
    bits = 0
    for q in orbitals:
        bits |= 1 << q
    return bits


def orbitals_from_bits(bits: int) -> tuple[int, ...]:
    out = []
    q = 0
    while bits:
        if bits & 1:
            out.append(q)
        bits >>= 1
        q += 1
    return tuple(out)


def occupied_below(bits: int, q: int) -> int:
    return bin(bits & ((1 << q) - 1)).count("1")


def apply_ladder(dagger: bool, q: int, bits: int) -> Optional[tuple[int, int]]:
    """
    Apply c†_q (dagger) or c_q to a bit state. Returns (sign, new bits) or
    None when the result vanishes.
    """
    occupied = (bits >> q) & 1
    if dagger == bool(occupied):
        return None
    sign = -1 if occupied_below(bits, q) % 2 else 1
    return sign, bits ^ (1 << q)


def apply_string(ops: Sequence[LadderOp], bits: int) -> Optional[tuple[int, int]]:
    """
    Apply a product of ladder operators, rightmost first.
    """
    sign = 1
    for dagger, q in reversed(ops):
        step = apply_ladder(dagger, q, bits)
        if step is None:
            return None
        sign *= step[0]
        bits = step[1]
    return sign, bits


def apply_operator(
    terms: Sequence[OperatorTerm], vector: dict[int, complex]
) -> dict[int, complex]:
    out: dict[int, complex] = defaultdict(complex)
    for bits, amplitude in vector.items():
        if amplitude == 0:
            continue
        for coefficient, ops in terms:
            result = apply_string(ops, bits)
            if result is None:
                continue
            sign, new_bits = result
            out[new_bits] += sign * coefficient * amplitude
    return dict(out)


def reorder_sign(sequence: Sequence[int]) -> int:
    """
    Sign of the permutation that sorts a sequence of distinct orbitals.
    """
    if len(sequence) < 2:
        return 1
    order = sorted(range(len(sequence)), key=lambda i: sequence[i])
    return Permutation(order).signature()
