"""Locally refined 1D meshes and the fine/coarse degree-of-freedom split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COARSE = "coarse"
FINE = "fine"

_GLL_REF = {
    1: np.array([-1.0, 1.0]),
    2: np.array([-1.0, 0.0, 1.0]),
    3: np.array([-1.0, -1.0 / np.sqrt(5.0), 1.0 / np.sqrt(5.0), 1.0]),
}


@dataclass(frozen=True)
class Mesh1D:
    """Partition of an interval into contiguous elements, with a single
    contiguous block of refined ("fine") elements."""

    vertices: np.ndarray
    tags: tuple            # per element, COARSE or FINE
    h_coarse: float
    h_fine: float

    @property
    def n_elements(self):
        return len(self.vertices) - 1

    @property
    def elements(self):
        """Element records (left vertex index, right vertex index, tag)."""
        return tuple((i, i + 1, t) for i, t in enumerate(self.tags))

    def element_size(self, e):
        return self.vertices[e + 1] - self.vertices[e]

    def fine_elements(self):
        return np.array([t == FINE for t in self.tags])

    def validate(self):
        v = self.vertices
        if not np.all(np.diff(v) > 0):
            raise ValueError("vertices must be strictly increasing")
        fine = self.fine_elements()
        if fine.any():
            idx = np.flatnonzero(fine)
            if not np.all(np.diff(idx) == 1):
                raise ValueError("fine elements must form one contiguous block")
            sizes = np.diff(v)[idx]
            if not np.allclose(sizes, self.h_fine, rtol=1e-9, atol=1e-14):
                raise ValueError("fine elements must all have size h_fine")


def _commensurate(length, h):
    n = length / h
    n_round = round(n)
    if n_round < 0 or abs(n - n_round) > 1e-9 * max(1.0, abs(n)):
        return None
    return n_round


def build_mesh(domain, fine_region, h_coarse, p):
    """Mesh ``domain`` with size h_coarse outside ``fine_region`` and size
    h_coarse/p inside it.  For p = 1 the mesh is equidistant and every
    element is tagged coarse.

    Both endpoints of fine_region must lie on the coarse grid.
    """
    x0, x1 = map(float, domain)
    f0, f1 = map(float, fine_region)
    if p < 1 or int(p) != p:
        raise ValueError("p must be a positive integer")
    p = int(p)
    if not (x0 <= f0 <= f1 <= x1):
        raise ValueError("fine_region must lie inside domain")
    n_left = _commensurate(f0 - x0, h_coarse)
    n_mid = _commensurate(f1 - f0, h_coarse)
    n_right = _commensurate(x1 - f1, h_coarse)
    if None in (n_left, n_mid, n_right):
        raise ValueError(
            "domain and fine_region boundaries must be commensurate with h_coarse"
        )
    if n_left + n_mid + n_right < 1:
        raise ValueError("domain must contain at least one element")
    h_fine = h_coarse / p
    left = np.linspace(x0, f0, n_left + 1)
    mid = np.linspace(f0, f1, n_mid * p + 1)
    right = np.linspace(f1, x1, n_right + 1)
    vertices = np.concatenate([left[:-1], mid[:-1], right])
    if p == 1:
        tags = (COARSE,) * (n_left + n_mid + n_right)
    else:
        tags = (COARSE,) * n_left + (FINE,) * (n_mid * p) + (COARSE,) * n_right
    mesh = Mesh1D(vertices=vertices, tags=tags, h_coarse=float(h_coarse), h_fine=float(h_fine))
    mesh.validate()
    return mesh


def save_mesh(mesh, path):
    """Plain-text format: header line with the vertex count, one coordinate
    per line, then one `left right tag` record per element."""
    with open(path, "w") as f:
        f.write(f"{len(mesh.vertices)}\n")
        for x in mesh.vertices:
            f.write(f"{float(x)!r}\n")
        for left, right, tag in mesh.elements:
            f.write(f"{left} {right} {tag}\n")


def load_mesh(path):
    with open(path) as f:
        n_vertices = int(f.readline())
        vertices = np.array([float(f.readline()) for _ in range(n_vertices)])
        tags = []
        for line in f:
            if line.strip():
                _, _, tag = line.split()
                tags.append(tag)
    tags = tuple(tags)
    if len(tags) != n_vertices - 1:
        raise ValueError("element count does not match vertex count")
    sizes = np.diff(vertices)
    coarse_sizes = sizes[[t == COARSE for t in tags]]
    fine_sizes = sizes[[t == FINE for t in tags]]
    h_coarse = float(coarse_sizes.max()) if coarse_sizes.size else float(sizes.max())
    h_fine = float(fine_sizes.max()) if fine_sizes.size else h_coarse
    mesh = Mesh1D(vertices=vertices, tags=tags, h_coarse=h_coarse, h_fine=h_fine)
    mesh.validate()
    return mesh


@dataclass(frozen=True)
class DofPartition:
    """Boolean split of the degrees of freedom; True marks a fine dof
    (a unit entry of the diagonal selection matrix)."""

    n_dofs: int
    fine_mask: np.ndarray

    def __post_init__(self):
        if len(self.fine_mask) != self.n_dofs:
            raise ValueError("mask length must equal dof count")

    @property
    def n_fine(self):
        return int(self.fine_mask.sum())

    def expanded(self, copies=2):
        """Partition for a stacked state made of `copies` identical blocks."""
        return DofPartition(self.n_dofs * copies, np.tile(self.fine_mask, copies))


def cg_layout(mesh, l, bc="dirichlet"):
    """Global dof layout for continuous elements of degree l with nodes at
    the Gauss-Lobatto points of each element.

    Returns (n_dofs, element_dofs, node_coords) where element_dofs[e] holds
    the l+1 global indices of element e (-1 marks an eliminated boundary
    dof) and node_coords the coordinates of the retained dofs.
    """
    if l not in (1, 2, 3):
        raise ValueError("polynomial degree must be 1, 2 or 3")
    n_el = mesh.n_elements
    ref = _GLL_REF[l]
    n_glob = n_el * l + 1
    coords = np.empty(n_glob)
    element_dofs = np.empty((n_el, l + 1), dtype=np.int64)
    for e in range(n_el):
        xl, xr = mesh.vertices[e], mesh.vertices[e + 1]
        nodes = xl + (ref + 1.0) * 0.5 * (xr - xl)
        for j in range(l + 1):
            g = e * l + j
            element_dofs[e, j] = g
            coords[g] = nodes[j]
    if bc == "dirichlet":
        keep = np.ones(n_glob, dtype=bool)
        keep[0] = keep[-1] = False
        remap = -np.ones(n_glob, dtype=np.int64)
        remap[keep] = np.arange(keep.sum())
        element_dofs = remap[element_dofs]
        coords = coords[keep]
        n_dofs = int(keep.sum())
    elif bc == "neumann":
        n_dofs = n_glob
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return n_dofs, element_dofs, coords


def dg_layout(mesh, l):
    """Element-local dof layout for broken spaces: element e owns the
    contiguous dof range [e*(l+1), (e+1)*(l+1))."""
    if l not in (1, 2, 3):
        raise ValueError("polynomial degree must be 1, 2 or 3")
    n_el = mesh.n_elements
    element_dofs = np.arange(n_el * (l + 1), dtype=np.int64).reshape(n_el, l + 1)
    ref = _GLL_REF[l]
    coords = np.empty(n_el * (l + 1))
    for e in range(n_el):
        xl, xr = mesh.vertices[e], mesh.vertices[e + 1]
        coords[element_dofs[e]] = xl + (ref + 1.0) * 0.5 * (xr - xl)
    return n_el * (l + 1), element_dofs, coords


def fine_dof_mask(mesh, family, l, bc="dirichlet", interface="fine"):
    """Mark every scalar dof supported on a fine element.

    For the broken (DG) spaces dofs are element-local, so the mask follows
    the element tags directly.  For continuous elements a vertex dof shared
    by a coarse and a fine element is assigned per ``interface``; the
    default puts it in the fine set, so the coarse-step operator never
    multiplies a column reaching into the refined region.
    """
    if interface not in ("fine", "coarse"):
        raise ValueError(f"interface must be 'fine' or 'coarse', got {interface!r}")
    fine_el = mesh.fine_elements()
    n_el = mesh.n_elements
    if family in ("ipdg", "ndg"):
        n_dofs, element_dofs, _ = dg_layout(mesh, l)
        mask = np.zeros(n_dofs, dtype=bool)
        for e in np.flatnonzero(fine_el):
            mask[element_dofs[e]] = True
        if interface == "fine":
            # trace dofs of coarse elements on a coarse/fine interface see
            # fine-scale coupling (penalty ~ 1/h_fine), so they take the
            # small steps too; without this the coarse step is subject to
            # the fine CFL limit through the interface columns
            for e in range(n_el):
                if fine_el[e]:
                    continue
                if e > 0 and fine_el[e - 1]:
                    mask[element_dofs[e, 0]] = True
                if e < n_el - 1 and fine_el[e + 1]:
                    mask[element_dofs[e, -1]] = True
        return DofPartition(n_dofs, mask)
    if family != "cg":
        raise ValueError(f"unknown discretization family {family!r}")
    n_dofs, element_dofs, _ = cg_layout(mesh, l, bc)
    touched = np.zeros(n_dofs, dtype=np.int64)
    owned = np.zeros(n_dofs, dtype=np.int64)
    for e in range(mesh.n_elements):
        for g in element_dofs[e]:
            if g < 0:
                continue
            touched[g] += 1
            if fine_el[e]:
                owned[g] += 1
    if interface == "fine":
        mask = owned > 0
    else:
        mask = (owned > 0) & (owned == touched)
    return DofPartition(n_dofs, mask)
