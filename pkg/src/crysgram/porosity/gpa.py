"""Grid-point porosity: void fraction and probe-accessible void fraction.

A regular grid of cell-centered points covers the unit cell. Points
within any atom's van der Waals sphere (minimum-image over the 27
neighboring cells) are occupied; the void fraction is the unoccupied
share. A point is probe-admissible when every atom is at least
r_vdw + r_probe away; admissible points connect by face adjacency under
periodic wrap, and components that wrap around a lattice direction are
accessible (when none wraps, the largest component counts).
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import ndimage

from ..errors import PorosityError

DEFAULT_RHO_GRID = 5.0
DEFAULT_R_PROBE = 1.2


def _load_default_radii():
    table = {}
    text = resources.files("crysgram.porosity").joinpath(
        "data", "vdw_radii.tsv").read_text(encoding="utf-8")
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        symbol, radius = line.split("\t")
        table[symbol] = float(radius)
    return table


_DEFAULT_RADII = None


def default_radius_table():
    global _DEFAULT_RADII
    if _DEFAULT_RADII is None:
        _DEFAULT_RADII = _load_default_radii()
    return dict(_DEFAULT_RADII)


def load_radius_table(path):
    """Element -> radius override file: 'Symbol<TAB or space>radius' lines."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise PorosityError(f"{path}:{lineno}: expected 'symbol radius'")
            table[parts[0]] = float(parts[1])
    return table


@dataclass
class PeriodicStructure:
    """Unit cell (rows are lattice vectors, angstrom) plus fractional sites."""

    lattice: np.ndarray
    sites: list  # (element symbol, fractional 3-vector)
    radius_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lattice = np.asarray(self.lattice, dtype=np.float64)
        if self.lattice.shape != (3, 3):
            raise PorosityError(
                f"lattice must be 3x3, got {self.lattice.shape}")
        if np.linalg.det(self.lattice) <= 0:
            raise PorosityError("lattice must have positive determinant")
        wrapped = []
        for element, frac in self.sites:
            frac = np.asarray(frac, dtype=np.float64) % 1.0
            wrapped.append((element, frac))
        self.sites = wrapped

    @property
    def volume(self):
        return float(np.linalg.det(self.lattice))

    @property
    def n_atoms(self):
        return len(self.sites)

    def radius_of(self, element, table=None):
        merged = table if table is not None else default_radius_table()
        if element in self.radius_overrides:
            return float(self.radius_overrides[element])
        if element not in merged:
            raise PorosityError(
                f"no van der Waals radius for element {element!r}; "
                "supply an override table")
        return float(merged[element])

    def min_cell_width(self):
        """Smallest perpendicular distance between opposite cell faces."""
        widths = []
        for i in range(3):
            others = [self.lattice[j] for j in range(3) if j != i]
            normal = np.cross(others[0], others[1])
            widths.append(abs(self.lattice[i] @ normal) / np.linalg.norm(normal))
        return min(widths)


def load_structure(path):
    """Structure file: JSON with 'lattice' (9 reals or 3x3) and 'sites'."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    lattice = np.asarray(payload["lattice"], dtype=np.float64).reshape(3, 3)
    sites = [(str(entry[0]), np.asarray(entry[1:4], dtype=np.float64))
             for entry in payload["sites"]]
    overrides = {str(k): float(v)
                 for k, v in payload.get("radius_overrides", {}).items()}
    return PeriodicStructure(lattice=lattice, sites=sites,
                             radius_overrides=overrides)


def save_structure(structure, path):
    payload = {
        "lattice": structure.lattice.tolist(),
        "sites": [[element, *frac.tolist()] for element, frac in structure.sites],
    }
    if structure.radius_overrides:
        payload["radius_overrides"] = structure.radius_overrides
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class GridSpec:
    """Points per angstrom along each lattice direction."""

    rho_grid: float = DEFAULT_RHO_GRID

    def __post_init__(self):
        if not self.rho_grid > 0:
            raise PorosityError(f"grid density must be positive: {self.rho_grid}")

    def dims(self, structure):
        lengths = np.linalg.norm(structure.lattice, axis=1)
        return tuple(max(1, math.ceil(self.rho_grid * L)) for L in lengths)


@dataclass(frozen=True)
class PorosityResult:
    phi_void: float
    phi_acc: float
    n_unoccupied: int
    n_total: int
    n_accessible: int
    r_probe: float
    grid_dims: tuple

    def __post_init__(self):
        if not 0.0 <= self.phi_acc <= self.phi_void <= 100.0:
            raise PorosityError(
                f"inconsistent result: phi_acc={self.phi_acc} "
                f"phi_void={self.phi_void}")

    def to_dict(self):
        return {
            "phi_void_percent": self.phi_void,
            "phi_accessible_percent": self.phi_acc,
            "n_unoccupied": self.n_unoccupied,
            "n_total": self.n_total,
            "n_accessible": self.n_accessible,
            "r_probe_angstrom": self.r_probe,
            "grid_dims": list(self.grid_dims),
        }


def _grid_fractional(dims):
    """Cell-centered fractional offsets (i + 1/2) / n along each axis."""
    axes = [(np.arange(n) + 0.5) / n for n in dims]
    fx, fy, fz = np.meshgrid(*axes, indexing="ij")
    return np.stack([fx.ravel(), fy.ravel(), fz.ravel()], axis=1)


_NEIGHBOR_SHIFTS = np.array([(i, j, k)
                             for i in (-1, 0, 1)
                             for j in (-1, 0, 1)
                             for k in (-1, 0, 1)], dtype=np.float64)


def _perpendicular_widths(lattice):
    widths = np.empty(3)
    for i in range(3):
        others = [lattice[j] for j in range(3) if j != i]
        normal = np.cross(others[0], others[1])
        widths[i] = abs(lattice[i] @ normal) / np.linalg.norm(normal)
    return widths


def _within_any_sphere(points_cart, structure, radii, chunk=262144):
    """Boolean per grid point: within `radii[site]` of some periodic image.

    Images whose sphere cannot intersect the unit cell (slab-distance
    bound per axis) are pruned before the distance passes.
    """
    n = points_cart.shape[0]
    hit = np.zeros(n, dtype=bool)
    widths = _perpendicular_widths(structure.lattice)
    site_images = []
    for (element, frac), radius in zip(structure.sites, radii):
        shifted = frac + _NEIGHBOR_SHIFTS
        slab_dist = np.maximum(np.maximum(-shifted, shifted - 1.0), 0.0) * widths
        keep = (slab_dist < radius).all(axis=1)
        images = shifted[keep] @ structure.lattice
        site_images.append((images, radius * radius))
    for start in range(0, n, chunk):
        block = points_cart[start:start + chunk]
        acc = np.zeros(block.shape[0], dtype=bool)
        for images, r2 in site_images:
            for image in images:
                d2 = np.einsum("ij,ij->i", block - image, block - image)
                acc |= d2 < r2
        hit[start:start + chunk] = acc
    return hit


class _OffsetUnionFind:
    """Union-find over component labels with integer wrap displacements.

    ``offset[x]`` is the lattice-translation displacement of x relative
    to its parent; a union that closes a loop with inconsistent
    displacement marks the root as percolating.
    """

    def __init__(self, n_labels):
        self.parent = list(range(n_labels + 1))
        self.offset = np.zeros((n_labels + 1, 3), dtype=np.int64)
        self.size = [1] * (n_labels + 1)
        self.percolates = [False] * (n_labels + 1)

    def find(self, x):
        root = x
        path = []
        while self.parent[root] != root:
            path.append(root)
            root = self.parent[root]
        total = np.zeros(3, dtype=np.int64)
        for node in reversed(path):
            total += self.offset[node]
            self.parent[node] = root
            self.offset[node] = total.copy()
        return root

    def union(self, a, b, displacement):
        """Join a and b where unwrapped(b) = unwrapped(a) + displacement."""
        ra, rb = self.find(a), self.find(b)
        disp = (np.asarray(displacement, dtype=np.int64)
                + self.offset[a] - self.offset[b])
        if ra == rb:
            if disp.any():
                self.percolates[ra] = True
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
            disp = -disp
        self.parent[rb] = ra
        self.offset[rb] = disp
        self.size[ra] += self.size[rb]
        self.percolates[ra] = self.percolates[ra] or self.percolates[rb]
        return ra


def _accessible_count(admissible, dims):
    """Accessible points among admissible ones under periodic flood fill."""
    grid = admissible.reshape(dims)
    if not grid.any():
        return 0
    labels, n_labels = ndimage.label(grid)  # 6-connectivity
    if n_labels == 0:
        return 0
    uf = _OffsetUnionFind(n_labels)

    for axis in range(3):
        lo = np.take(labels, 0, axis=axis)
        hi = np.take(labels, dims[axis] - 1, axis=axis)
        both = (lo > 0) & (hi > 0)
        if not both.any():
            continue
        displacement = np.zeros(3, dtype=np.int64)
        displacement[axis] = 1
        pairs = np.unique(
            np.stack([hi[both].ravel(), lo[both].ravel()], axis=1), axis=0)
        for a, b in pairs:
            uf.union(int(a), int(b), displacement)

    counts = np.bincount(labels.ravel())  # counts[0] is background
    root_counts = {}
    root_percolates = {}
    for label in range(1, n_labels + 1):
        root = uf.find(label)
        root_counts[root] = root_counts.get(root, 0) + int(counts[label])
        root_percolates[root] = root_percolates.get(root, False) \
            or uf.percolates[root]
    percolating = [r for r, flag in root_percolates.items() if flag]
    if percolating:
        return sum(root_counts[r] for r in percolating)
    return max(root_counts.values())


def _prepare(structure, grid, r_probe, radius_table):
    dims = grid.dims(structure)
    radii = [structure.radius_of(element, radius_table)
             for element, _ in structure.sites]
    if radii:
        reach = max(radii) + max(r_probe, 0.0)
        if reach >= 0.5 * structure.min_cell_width():
            warnings.warn(
                "atom reach exceeds half the minimal cell width; the "
                "27-cell minimum-image search may undercount overlaps",
                stacklevel=3)
    points = _grid_fractional(dims) @ structure.lattice
    return dims, radii, points


def void_fraction(structure, grid=None, radius_table=None):
    """Unoccupied share of grid points, in percent."""
    grid = grid or GridSpec()
    dims, radii, points = _prepare(structure, grid, 0.0, radius_table)
    occupied = _within_any_sphere(points, structure, radii)
    n_total = points.shape[0]
    n_unoccupied = int(n_total - occupied.sum())
    phi_void = 100.0 * n_unoccupied / n_total
    return PorosityResult(phi_void=phi_void, phi_acc=0.0,
                          n_unoccupied=n_unoccupied, n_total=n_total,
                          n_accessible=0, r_probe=0.0, grid_dims=dims)


def accessible_void_fraction(structure, grid=None, r_probe=DEFAULT_R_PROBE,
                             flood_fill=True, radius_table=None):
    """Void fraction plus the probe-accessible fraction.

    With ``flood_fill`` disabled the accessible count is simply the
    probe-admissible count (pure overlap criterion).
    """
    if r_probe < 0:
        raise PorosityError(f"probe radius must be >= 0, got {r_probe}")
    grid = grid or GridSpec()
    dims, radii, points = _prepare(structure, grid, r_probe, radius_table)
    n_total = points.shape[0]

    occupied = _within_any_sphere(points, structure, radii)
    n_unoccupied = int(n_total - occupied.sum())
    phi_void = 100.0 * n_unoccupied / n_total

    blocked = _within_any_sphere(points, structure,
                                 [r + r_probe for r in radii])
    admissible = ~blocked
    if flood_fill:
        n_accessible = _accessible_count(admissible, dims)
    else:
        n_accessible = int(admissible.sum())
    phi_acc = 100.0 * n_accessible / n_total
    return PorosityResult(phi_void=phi_void, phi_acc=phi_acc,
                          n_unoccupied=n_unoccupied, n_total=n_total,
                          n_accessible=n_accessible, r_probe=r_probe,
                          grid_dims=dims)


def porosity_tokens(result, binning):
    """(porosity token, accessible-void token) for the informatics slots."""
    from ..tokens.vocab import quantize_informatics

    return (quantize_informatics(result.phi_void, "porosity_fraction", binning),
            quantize_informatics(result.phi_acc, "accessible_void_fraction",
                                 binning))


def structure_informatics(structure, result):
    """InformaticsFields carrying volume, atom count, and porosity values."""
    from ..tokens.tokenizer import InformaticsFields

    return InformaticsFields(
        unit_cell_volume=structure.volume,
        atom_count=structure.n_atoms if structure.n_atoms else None,
        porosity_fraction=result.phi_void,
        accessible_void_fraction=result.phi_acc,
    )
