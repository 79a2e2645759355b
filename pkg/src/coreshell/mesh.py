"""Interface-fitted core-shell meshes.

Two deterministic builders are provided: a 1D radial mesh of [0, r2] for the
spherically symmetric reduction (volume weight r^(N-1) applied at assembly
time), and a structured polar triangulation of the disc of radius r2 whose
edge set contains an inscribed polygon of the interface circle r = r1.

Meshes are immutable once built (arrays are write-protected) and can be
shared freely across threads.
"""

import math
from dataclasses import dataclass, field

import numpy as np

CORE = 0
SHELL = 1

_TOL = 1e-12


class GeometryError(ValueError):
    """Geometry specification or mesh violates an invariant."""


@dataclass(frozen=True)
class GeometrySpec:
    """Core-shell geometry request.

    kind      : "radial" (any dimension >= 2) or "planar2d" (dimension == 2)
    dimension : spatial dimension N; sets the r^(N-1) weight of radial meshes
    r1, r2    : core and outer radii, 0 < r1 < r2
    h         : target mesh size, > 0
    """

    kind: str
    dimension: int
    r1: float
    r2: float
    h: float

    def __post_init__(self):
        if self.kind not in ("radial", "planar2d"):
            raise GeometryError(f"unknown geometry kind {self.kind!r}")
        if self.dimension < 2:
            raise GeometryError(f"dimension must be >= 2, got {self.dimension}")
        if self.kind == "planar2d" and self.dimension != 2:
            raise GeometryError("planar2d geometry fixes dimension = 2")
        if not 0.0 < self.r1:
            raise GeometryError(f"core radius r1 must be positive, got {self.r1}")
        if not self.r1 < self.r2:
            raise GeometryError(f"radii must satisfy r1 < r2, got r1={self.r1}, r2={self.r2}")
        if not self.h > 0.0:
            raise GeometryError(f"target mesh size h must be positive, got {self.h}")


@dataclass(frozen=True)
class GammaFacet:
    """One interface facet: a node in 1D, an edge in 2D.

    The unit normal points from the core element toward the shell element.
    """

    nodes: tuple
    core_element: int
    shell_element: int
    normal: tuple


@dataclass
class CoreShellMesh:
    """Conforming mesh with per-element region tags and marked boundaries.

    nodes    : (n,) radii for radial meshes, (n, 2) coordinates for planar ones
    elements : (m, 2) segments or (m, 3) triangles (CCW), vertex indices
    region   : (m,) tags, CORE or SHELL; no element straddles the interface
    s_nodes  : node indices on the outer boundary (the Dirichlet set)
    gamma_nodes : node indices on the interface polygon / interface point
    """

    kind: str
    dimension: int
    r1: float
    r2: float
    nodes: np.ndarray
    elements: np.ndarray
    region: np.ndarray
    s_nodes: np.ndarray
    gamma_nodes: np.ndarray
    gamma_facets: list = field(default_factory=list)

    def __post_init__(self):
        for arr in (self.nodes, self.elements, self.region, self.s_nodes, self.gamma_nodes):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def node_radii(self) -> np.ndarray:
        if self.kind == "radial":
            return self.nodes
        return np.sqrt(self.nodes[:, 0] ** 2 + self.nodes[:, 1] ** 2)

    def dirichlet_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.s_nodes] = True
        return mask

    def element_measures(self) -> np.ndarray:
        """Lengths of segments or signed areas of triangles (positive if CCW)."""
        if self.kind == "radial":
            return self.nodes[self.elements[:, 1]] - self.nodes[self.elements[:, 0]]
        p = self.nodes
        a, b, c = (p[self.elements[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def validate(self):
        """Raise GeometryError if any mesh invariant is broken."""
        measures = self.element_measures()
        if np.any(measures <= 0.0):
            bad = int(np.argmin(measures))
            raise GeometryError(f"element {bad} has non-positive measure {measures[bad]}")
        radii = self.node_radii()
        tol = _TOL * self.r2 * max(1.0, self.n_nodes)
        if np.any(np.abs(radii[self.s_nodes] - self.r2) > tol):
            raise GeometryError("an outer-boundary node is not at distance r2")
        if np.any(np.abs(radii[self.gamma_nodes] - self.r1) > tol):
            raise GeometryError("an interface node is not at distance r1")
        # Interface-fitted: element vertices never lie strictly on both sides.
        for e in range(self.n_elements):
            r_e = radii[self.elements[e]]
            if self.region[e] == CORE:
                if np.any(r_e > self.r1 + tol):
                    raise GeometryError(f"core element {e} has a vertex outside r1")
            else:
                if np.any(r_e < self.r1 - tol):
                    raise GeometryError(f"shell element {e} has a vertex inside r1")
        if len(self.gamma_facets) == 0:
            raise GeometryError("mesh has no interface facets")
        for f in self.gamma_facets:
            if self.region[f.core_element] != CORE or self.region[f.shell_element] != SHELL:
                raise GeometryError("interface facet is not shared by one core and one shell element")
        iface = np.isin(np.arange(self.n_nodes), self.s_nodes)
        if np.any(iface & (radii < self.r2 - tol)):
            raise GeometryError("an interior node is Dirichlet-masked")


# ----------------------------------------------------------------------------
# radial meshes
# ----------------------------------------------------------------------------


def _radial_from_nodes(nodes: np.ndarray, spec_like) -> CoreShellMesh:
    r1, r2 = spec_like.r1, spec_like.r2
    n = nodes.shape[0]
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    region = np.where(mids < r1, CORE, SHELL).astype(np.int64)
    i_gamma = int(np.searchsorted(nodes, r1))
    if nodes[i_gamma] != r1:
        raise GeometryError("radial mesh is missing the interface node at r1")
    facet = GammaFacet(nodes=(i_gamma,), core_element=i_gamma - 1,
                       shell_element=i_gamma, normal=(1.0,))
    return CoreShellMesh(
        kind="radial",
        dimension=spec_like.dimension,
        r1=r1,
        r2=r2,
        nodes=nodes,
        elements=elements,
        region=region,
        s_nodes=np.array([n - 1], dtype=np.int64),
        gamma_nodes=np.array([i_gamma], dtype=np.int64),
        gamma_facets=[facet],
    )


def build_radial_mesh(spec: GeometrySpec) -> CoreShellMesh:
    """Partition [0, r2] with a node forced at r1 and spacing <= h per region.

    The center r = 0 carries no Dirichlet mask; the natural condition
    u'(0) = 0 holds weakly through the r^(N-1) volume weight.
    """
    if spec.kind != "radial":
        raise GeometryError(f"build_radial_mesh requires kind='radial', got {spec.kind!r}")
    n_core = max(1, math.ceil(spec.r1 / spec.h - _TOL))
    n_shell = max(1, math.ceil((spec.r2 - spec.r1) / spec.h - _TOL))
    nodes = np.concatenate([
        np.linspace(0.0, spec.r1, n_core + 1),
        np.linspace(spec.r1, spec.r2, n_shell + 1)[1:],
    ])
    nodes[n_core] = spec.r1  # exact, independent of linspace rounding
    return _radial_from_nodes(nodes, spec)


# ----------------------------------------------------------------------------
# planar annulus-in-disc meshes
# ----------------------------------------------------------------------------


def _extract_gamma_facets(nodes, elements, region, gamma_set):
    """Interface facets are the edges whose endpoints are both interface nodes."""
    edge_elems = {}
    for e, tri in enumerate(elements):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            edge_elems.setdefault((min(a, b), max(a, b)), []).append(e)
    facets = []
    for (a, b), elems in sorted(edge_elems.items()):
        if a not in gamma_set or b not in gamma_set:
            continue
        if len(elems) != 2:
            raise GeometryError(f"interface edge ({a},{b}) not shared by two elements")
        e0, e1 = elems
        if region[e0] == CORE and region[e1] == SHELL:
            core_e, shell_e = e0, e1
        elif region[e1] == CORE and region[e0] == SHELL:
            core_e, shell_e = e1, e0
        else:
            raise GeometryError(f"interface edge ({a},{b}) does not separate core from shell")
        tangent = nodes[b] - nodes[a]
        normal = np.array([tangent[1], -tangent[0]])
        normal /= np.linalg.norm(normal)
        core_centroid = nodes[elements[core_e]].mean(axis=0)
        midpoint = 0.5 * (nodes[a] + nodes[b])
        if np.dot(normal, core_centroid - midpoint) > 0.0:
            normal = -normal
        facets.append(GammaFacet(nodes=(a, b), core_element=core_e,
                                 shell_element=shell_e, normal=tuple(normal)))
    return facets


def _planar_from_arrays(nodes, elements, region, gamma_ids, s_ids, spec_like):
    mesh = CoreShellMesh(
        kind="planar2d",
        dimension=2,
        r1=spec_like.r1,
        r2=spec_like.r2,
        nodes=nodes,
        elements=elements,
        region=region,
        s_nodes=np.asarray(sorted(s_ids), dtype=np.int64),
        gamma_nodes=np.asarray(sorted(gamma_ids), dtype=np.int64),
        gamma_facets=[],
    )
    mesh.gamma_facets.extend(_extract_gamma_facets(nodes, elements, region, set(gamma_ids)))
    return mesh


def build_annulus_mesh(spec: GeometrySpec) -> CoreShellMesh:
    """Structured polar triangulation of the disc with a fitted interface ring.

    Rings x sectors layout: concentric node rings at the core/shell
    subdivision radii (one ring exactly at r1), a constant sector count, a
    center fan, and two CCW triangles per quad between consecutive rings.
    Region tags come from centroid radii; the circles are represented by
    their inscribed polygons.
    """
    if spec.kind != "planar2d":
        raise GeometryError(f"build_annulus_mesh requires kind='planar2d', got {spec.kind!r}")
    n_ring_core = max(1, math.ceil(spec.r1 / spec.h - _TOL))
    n_ring_shell = max(1, math.ceil((spec.r2 - spec.r1) / spec.h - _TOL))
    n_sectors = max(8, math.ceil(2.0 * math.pi * spec.r2 / spec.h))
    ring_radii = np.concatenate([
        np.linspace(0.0, spec.r1, n_ring_core + 1)[1:],
        np.linspace(spec.r1, spec.r2, n_ring_shell + 1)[1:],
    ])
    ring_radii[n_ring_core - 1] = spec.r1
    n_rings = ring_radii.shape[0]

    angles = 2.0 * math.pi * np.arange(n_sectors) / n_sectors
    nodes = np.zeros((1 + n_rings * n_sectors, 2))
    for k, radius in enumerate(ring_radii):
        sl = slice(1 + k * n_sectors, 1 + (k + 1) * n_sectors)
        nodes[sl, 0] = radius * np.cos(angles)
        nodes[sl, 1] = radius * np.sin(angles)

    def ring_node(k, s):
        return 1 + k * n_sectors + (s % n_sectors)

    tris = []
    for s in range(n_sectors):
        tris.append((0, ring_node(0, s), ring_node(0, s + 1)))
    for k in range(n_rings - 1):
        for s in range(n_sectors):
            v00, v01 = ring_node(k, s), ring_node(k, s + 1)
            v10, v11 = ring_node(k + 1, s), ring_node(k + 1, s + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    elements = np.asarray(tris, dtype=np.int64)

    centroids = nodes[elements].mean(axis=1)
    centroid_radii = np.sqrt(centroids[:, 0] ** 2 + centroids[:, 1] ** 2)
    region = np.where(centroid_radii < spec.r1, CORE, SHELL).astype(np.int64)

    gamma_ids = [ring_node(n_ring_core - 1, s) for s in range(n_sectors)]
    s_ids = [ring_node(n_rings - 1, s) for s in range(n_sectors)]
    mesh = _planar_from_arrays(nodes, elements, region, gamma_ids, s_ids, spec)
    mesh.validate()
    return mesh


def build_mesh(spec: GeometrySpec) -> CoreShellMesh:
    if spec.kind == "radial":
        return build_radial_mesh(spec)
    return build_annulus_mesh(spec)


# ----------------------------------------------------------------------------
# uniform refinement
# ----------------------------------------------------------------------------


def refine(mesh: CoreShellMesh) -> CoreShellMesh:
    """Uniform refinement: 1D bisection, 2D red refinement.

    Region tags and boundary markers are inherited. New nodes created on
    interface or outer-boundary edges are projected onto the respective
    circle, so the interface stays an inscribed polygon at every level.
    """
    if mesh.kind == "radial":
        old = mesh.nodes
        mids = 0.5 * (old[:-1] + old[1:])
        nodes = np.sort(np.concatenate([old, mids]))
        return _radial_from_nodes(nodes, mesh)

    nodes = list(map(tuple, mesh.nodes))
    gamma_edge_set = {tuple(sorted(f.nodes)) for f in mesh.gamma_facets}
    s_set = set(int(i) for i in mesh.s_nodes)
    gamma_ids = set(int(i) for i in mesh.gamma_nodes)
    s_ids = set(s_set)

    edge_count = {}
    for tri in mesh.elements:
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1

    midpoint_of = {}
    for key in sorted(edge_count):
        a, b = key
        p = 0.5 * (mesh.nodes[a] + mesh.nodes[b])
        if key in gamma_edge_set:
            p = p * (mesh.r1 / np.linalg.norm(p))
        elif edge_count[key] == 1 and a in s_set and b in s_set:
            p = p * (mesh.r2 / np.linalg.norm(p))
        idx = len(nodes)
        nodes.append((float(p[0]), float(p[1])))
        midpoint_of[key] = idx
        if key in gamma_edge_set:
            gamma_ids.add(idx)
        if edge_count[key] == 1 and a in s_set and b in s_set:
            s_ids.add(idx)

    tris = []
    region = []
    for e, tri in enumerate(mesh.elements):
        a, b, c = (int(v) for v in tri)
        mab = midpoint_of[(min(a, b), max(a, b))]
        mbc = midpoint_of[(min(b, c), max(b, c))]
        mca = midpoint_of[(min(c, a), max(c, a))]
        tris.extend([(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)])
        region.extend([mesh.region[e]] * 4)

    out = _planar_from_arrays(
        np.asarray(nodes, dtype=float),
        np.asarray(tris, dtype=np.int64),
        np.asarray(region, dtype=np.int64),
        gamma_ids,
        s_ids,
        mesh,
    )
    out.validate()
    return out
