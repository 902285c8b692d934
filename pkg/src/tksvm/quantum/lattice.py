"""Lattice geometry for chains and the square link lattice.

Square link lattice indexing: unit cell ``(x, y)`` carries two qubits, the
horizontal bond ``h(x, y) = 2 * (y * Lx + x)`` joining vertices ``(x, y)`` and
``(x + 1, y)``, and the vertical bond ``v(x, y) = h(x, y) + 1`` joining
``(x, y)`` and ``(x, y + 1)``. Coordinates wrap on periodic lattices.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["Lattice", "chain", "square_link"]

KINDS = ("chain", "square-link")
BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class Lattice:
    kind: str
    extents: tuple
    boundary: str = "open"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown lattice kind {self.kind!r}; expected one of {KINDS}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        ext = tuple(int(e) for e in self.extents)
        object.__setattr__(self, "extents", ext)
        if self.kind == "chain":
            if len(ext) != 1 or ext[0] < 1:
                raise ValueError("a chain needs one positive extent L")
        else:
            if len(ext) != 2 or min(ext) < 1:
                raise ValueError("a square link lattice needs extents (Lx, Ly)")
            if self.boundary == "periodic" and min(ext) < 2:
                raise ValueError("periodic square link lattice requires Lx, Ly >= 2")

    @property
    def site_count(self) -> int:
        if self.kind == "chain":
            return self.extents[0]
        return 2 * self.extents[0] * self.extents[1]

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def extent_label(self) -> str:
        return "x".join(str(e) for e in self.extents)

    @classmethod
    def from_label(cls, kind: str, label: str, boundary: str) -> "Lattice":
        return cls(kind, tuple(int(t) for t in label.split("x")), boundary)

    # square link helpers
    def h(self, x: int, y: int) -> int:
        lx, ly = self.extents
        return 2 * ((y % ly) * lx + (x % lx))

    def v(self, x: int, y: int) -> int:
        return self.h(x, y) + 1

    def vertex_bonds(self, x: int, y: int) -> tuple:
        """Bonds meeting at vertex ``(x, y)``: right, up, left, down."""
        return (self.h(x, y), self.v(x, y), self.h(x - 1, y), self.v(x, y - 1))

    def plaquette_bonds(self, x: int, y: int) -> tuple:
        """Bonds around the plaquette with lower-left corner ``(x, y)``: bottom, right, top, left."""
        return (self.h(x, y), self.v(x + 1, y), self.h(x, y + 1), self.v(x, y))

    def vertices(self) -> list:
        self._require_square()
        lx, ly = self.extents
        return [(x, y) for y in range(ly) for x in range(lx)]

    def _require_square(self):
        if self.kind != "square-link":
            raise ValueError("operation needs a square link lattice")


def chain(L: int, boundary: str = "open") -> Lattice:
    return Lattice("chain", (L,), boundary)


def square_link(Lx: int, Ly: int, boundary: str = "periodic") -> Lattice:
    return Lattice("square-link", (Lx, Ly), boundary)
