"""Truncated eigenbases of ``-Δ + μ²|x|²`` on the ball.

A mode is labelled ``(m, l, k)``: angular degree, index inside the degree-m
eigenspace of the sphere, and radial index. All ``l`` of a given ``(m, k)``
share one radial profile, which is stored once per degree in a
``RadialBlock``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import sturm_count
from .radial import RadialGrid, RadialProblem, _assemble, solve_modes
from .sphere import AngularMode, multiplicity

__all__ = ["RadialBlock", "ModeSet", "build_mode_set", "default_grid"]


@dataclass(frozen=True)
class RadialBlock:
    m: int
    nu: np.ndarray = field(repr=False)
    profiles: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.nu.size)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Modes sorted by eigenvalue, with per-degree radial data.

    Identity-hashed so derived quantities can be cached per instance.
    """

    d: int
    R: float
    mu: float
    grid: RadialGrid = field(repr=False)
    blocks: tuple[RadialBlock, ...] = field(repr=False)
    labels: tuple[tuple[int, int, int], ...]
    nu: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate modes")
        if len(self.labels) == 0:
            raise ValueError("empty mode set")

    def __len__(self) -> int:
        return len(self.labels)

    def block(self, m: int) -> RadialBlock:
        for b in self.blocks:
            if b.m == m:
                return b
        raise KeyError(m)

    @property
    def angular(self) -> list[AngularMode]:
        return [AngularMode(self.d, m, l) for m, l, _ in self.labels]

    @property
    def degrees(self) -> np.ndarray:
        return np.array([m for m, _, _ in self.labels], dtype=int)

    @property
    def profiles(self) -> np.ndarray:
        return np.vstack([self.block(m).profiles[k - 1] for m, _, k in self.labels])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([self.block(m).slopes[k - 1] for m, _, k in self.labels])

    def index(self, label: tuple[int, int, int]) -> int:
        return self.labels.index(tuple(label))

    def restrict(self, nu_max: float) -> "ModeSet":
        """Sub-basis of modes with ``ν ≤ nu_max``."""
        keep = self.nu <= nu_max
        if not keep.any():
            raise ValueError("empty mode set")
        blocks = []
        for b in self.blocks:
            n = int((b.nu <= nu_max).sum())
            if n:
                blocks.append(RadialBlock(b.m, b.nu[:n], b.profiles[:n], b.slopes[:n]))
        labels = tuple(lab for lab, k in zip(self.labels, keep) if k)
        return ModeSet(self.d, self.R, self.mu, self.grid, tuple(blocks), labels, self.nu[keep])


def default_grid(d: int, R: float, n: int = 256) -> RadialGrid:
    return RadialGrid(n, R, d)


def build_mode_set(
    d: int,
    R: float,
    mu: float,
    nu_max: float,
    grid: RadialGrid | None = None,
    m_max: int | None = None,
) -> ModeSet:
    """All modes with ``ν ≤ nu_max`` and complete angular eigenspaces.

    The number of radial modes below ``nu_max`` at each degree is read off a
    Sturm count, so only the needed eigenpairs are computed. Degrees are
    scanned upward until a degree contributes nothing (the centrifugal term
    makes every higher degree empty too), or up to ``m_max`` if given.
    """
    if not nu_max > d * mu:
        raise ValueError(f"nu_max must exceed d*mu = {d * mu}")
    grid = grid if grid is not None else default_grid(d, R)
    blocks = []
    m = 0
    while m_max is None or m < m_max:
        problem = RadialProblem(d, R, mu, m)
        diag, off = _assemble(problem, grid)
        count = int(sturm_count(diag, off, [nu_max])[0])
        if count == 0:
            break
        if 4 * count >= grid.n:
            raise ValueError(f"grid n={grid.n} too coarse for {count} radial modes at m={m}")
        modes = solve_modes(problem, grid, count)
        nu = np.array([x.nu for x in modes])
        keep = nu <= nu_max
        if keep.any():
            blocks.append(
                RadialBlock(
                    m,
                    nu[keep],
                    np.vstack([x.profile for x in modes])[keep],
                    np.array([x.boundary_slope for x in modes])[keep],
                )
            )
        m += 1
    entries = []
    for b in blocks:
        for k, nu in enumerate(b.nu, start=1):
            for l in range(1, multiplicity(b.m, d) + 1):
                entries.append((float(nu), b.m, l, k))
    if not entries:
        raise ValueError("empty mode set")
    entries.sort()
    labels = tuple((m, l, k) for _, m, l, k in entries)
    nus = np.array([e[0] for e in entries])
    return ModeSet(d, float(R), float(mu), grid, tuple(blocks), labels, nus)
