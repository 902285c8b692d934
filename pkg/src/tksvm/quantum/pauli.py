"""Pauli strings with explicit support and sign."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = ["PauliString", "COMPONENTS"]

COMPONENTS = "XYZ"
# (x bit, z bit) of a single-qubit Pauli; Y is represented as x = z = 1
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_TOKEN = re.compile(r"^([XYZ])(\d+)$")


@dataclass(frozen=True)
class PauliString:
    """``sign * prod_k P_k`` acting on distinct sites; sites are 0-based qubit indices."""

    support: tuple
    sign: int = 1

    def __post_init__(self):
        support = tuple(sorted((int(s), str(op).upper()) for s, op in self.support))
        sites = [s for s, _ in support]
        if len(set(sites)) != len(sites):
            raise ValueError("Pauli string sites must be distinct")
        if any(s < 0 for s in sites):
            raise ValueError("Pauli string sites must be non-negative")
        if any(op not in _BITS for _, op in support):
            raise ValueError("Pauli operators must be X, Y or Z")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "support", support)

    @classmethod
    def from_ops(cls, ops: dict, sign: int = 1) -> "PauliString":
        return cls(tuple(ops.items()), sign)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse ``"-Z0 X1 Z2"`` style text (0-based sites)."""
        text = text.strip()
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        support = []
        for tok in text.split():
            m = _TOKEN.match(tok)
            if m is None:
                raise ValueError(f"cannot parse Pauli token {tok!r}")
            support.append((int(m.group(2)), m.group(1)))
        return cls(tuple(support), sign)

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def sites(self) -> tuple:
        return tuple(s for s, _ in self.support)

    def check_sites(self, n_sites: int):
        if any(s >= n_sites for s in self.sites):
            raise IndexError(f"Pauli string {self} has a site outside 0..{n_sites - 1}")

    def bits(self, n_sites: int):
        """Binary symplectic ``(x, z)`` vectors of length ``n_sites``."""
        self.check_sites(n_sites)
        x = np.zeros(n_sites, dtype=np.uint8)
        z = np.zeros(n_sites, dtype=np.uint8)
        for s, op in self.support:
            x[s], z[s] = _BITS[op]
        return x, z

    def masks(self):
        """Integer bit masks ``(xmask, zmask, n_y)`` with qubit ``q`` on bit ``q``."""
        xmask = zmask = ny = 0
        for s, op in self.support:
            bx, bz = _BITS[op]
            xmask |= bx << s
            zmask |= bz << s
            ny += op == "Y"
        return xmask, zmask, ny

    def __mul__(self, other: "PauliString") -> "PauliString":
        # only valid for commuting strings, where the product is again Hermitian
        phase = 0
        ops = dict(self.support)
        table = {
            ("X", "Y"): ("Z", 1), ("Y", "Z"): ("X", 1), ("Z", "X"): ("Y", 1),
            ("Y", "X"): ("Z", 3), ("Z", "Y"): ("X", 3), ("X", "Z"): ("Y", 3),
        }
        for s, op in other.support:
            if s not in ops:
                ops[s] = op
            elif ops[s] == op:
                del ops[s]
            else:
                new, ph = table[(ops[s], op)]
                ops[s] = new
                phase += ph
        if phase % 2:
            raise ValueError("product of anticommuting Pauli strings is not Hermitian")
        sign = self.sign * other.sign * (-1 if phase % 4 == 2 else 1)
        return PauliString(tuple(ops.items()), sign)

    def __str__(self):
        body = " ".join(f"{op}{s}" for s, op in self.support) or "I"
        return ("-" if self.sign < 0 else "") + body
