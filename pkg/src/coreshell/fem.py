"""P1 finite-element assembly on core-shell meshes.

The assembled operators are the discrete counterparts of the weighted
diffusion form, the mass inner product, and the core-restricted consumption
load. The consumption term uses nodal (lumped) quadrature, entry i being
weight_i * rate(u_i) with nonnegative weights: this preserves the sign and
monotonicity structure of the continuous reaction exactly at the discrete
level, not just asymptotically.

Dirichlet rows/columns are handled by symmetric elimination: matrices are
stored over all nodes, solvers restrict to the unmasked subspace, and
residual/gradient vectors are returned embedded with zeros at masked nodes.

Assembly is sequential and deterministic; assembled systems are immutable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import CORE, CoreShellMesh, GeometryError
from .model import (
    ModelParams,
    consumption_potential,
    consumption_rate,
    consumption_rate_slope,
)


@dataclass
class DiscreteField:
    """Nodal coefficients of a P1 field with its Dirichlet mask.

    Masked entries are exactly zero for any field representing a member of
    the homogeneous-boundary space.
    """

    values: np.ndarray
    mask: np.ndarray

    def copy(self) -> "DiscreteField":
        return DiscreteField(self.values.copy(), self.mask)


def zero_field(mesh: CoreShellMesh) -> DiscreteField:
    return DiscreteField(np.zeros(mesh.n_nodes), mesh.dirichlet_mask())


def field_from_values(mesh: CoreShellMesh, values) -> DiscreteField:
    """Wrap nodal values as a field, zeroing the Dirichlet entries."""
    vals = np.array(values, dtype=float)
    if vals.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {vals.shape}")
    mask = mesh.dirichlet_mask()
    vals[mask] = 0.0
    return DiscreteField(vals, mask)


def ramp_field(mesh: CoreShellMesh, params: ModelParams) -> DiscreteField:
    """Nodal interpolant of c0 * (1 - r/r2): a documented nonzero initial state."""
    vals = params.c0 * (1.0 - mesh.node_radii() / mesh.r2)
    return field_from_values(mesh, vals)


@dataclass
class AssembledSystem:
    """Sparse operators of one mesh/parameter combination (immutable).

    K  : stiffness weighted by the region diffusion coefficients
    Kt : stiffness with unit coefficient (metric part of the V-norm)
    M  : consistent mass matrix (the H inner product)
    M1 : core-restricted lumped quadrature weights (zero off the core closure)
    lumped_mass : row sums of M, used as the diagonal dual-norm metric
    """

    mesh: CoreShellMesh
    K: sp.csr_matrix
    Kt: sp.csr_matrix
    M: sp.csr_matrix
    M1: np.ndarray
    lumped_mass: np.ndarray
    mask: np.ndarray
    free: np.ndarray
    weight_exponent: int
    core_volume: float

    def __post_init__(self):
        for arr in (self.M1, self.lumped_mass, self.mask, self.free):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    def restrict(self, matrix: sp.csr_matrix) -> sp.csr_matrix:
        """Symmetric elimination: the free-by-free block of a full matrix."""
        return matrix[self.free][:, self.free].tocsr()

    def check_field(self, u: DiscreteField):
        if u.values.shape != (self.n_nodes,):
            raise ValueError(
                f"field has {u.values.shape[0]} entries, system has {self.n_nodes} nodes"
            )


def _accumulate(entries: dict, i: int, j: int, value: float):
    key = (i, j)
    entries[key] = entries.get(key, 0.0) + value


def _monomial_integral(ra: float, rb: float, p: int) -> float:
    return (rb ** (p + 1) - ra ** (p + 1)) / (p + 1)


def assemble(
    mesh: CoreShellMesh,
    params: ModelParams,
    *,
    reaction: bool = True,
    weight_exponent: int | None = None,
    dirichlet_nodes=None,
    b_override: tuple | None = None,
) -> AssembledSystem:
    """Assemble stiffness, mass, and core quadrature weights on a mesh.

    Radial meshes include the r^(N-1) volume weight in every integral.
    Keyword arguments are testing hooks: `weight_exponent` overrides the
    radial weight (0 disables it), `dirichlet_nodes` overrides the mask,
    `reaction=False` zeroes the consumption weights (load-free mode), and
    `b_override` bypasses parameter validation for harness sanity checks.

    Element matrices are computed once per symmetric pair, and entries
    accumulate in element order, so K and M are symmetric bitwise.
    """
    b1, b2 = (params.b1, params.b2) if b_override is None else b_override
    if weight_exponent is None:
        weight_exponent = mesh.dimension - 1 if mesh.kind == "radial" else 0

    k_entries: dict = {}
    kt_entries: dict = {}
    m_entries: dict = {}
    m1 = np.zeros(mesh.n_nodes)
    lumped = np.zeros(mesh.n_nodes)
    core_volume = 0.0

    if mesh.kind == "radial":
        w = weight_exponent
        for e in range(mesh.n_elements):
            ia, ib = (int(v) for v in mesh.elements[e])
            ra, rb = float(mesh.nodes[ia]), float(mesh.nodes[ib])
            h = rb - ra
            if h <= 0.0:
                raise GeometryError(f"element {e} has singular geometry")
            i0 = _monomial_integral(ra, rb, w)
            i1 = _monomial_integral(ra, rb, w + 1)
            i2 = _monomial_integral(ra, rb, w + 2)
            b_e = b1 if mesh.region[e] == CORE else b2
            k_geom = i0 / h**2
            m_aa = (rb * rb * i0 - 2.0 * rb * i1 + i2) / h**2
            m_ab = (-ra * rb * i0 + (ra + rb) * i1 - i2) / h**2
            m_bb = (i2 - 2.0 * ra * i1 + ra * ra * i0) / h**2
            l_a = (rb * i0 - i1) / h
            l_b = (i1 - ra * i0) / h
            for (i, j, kij, mij) in (
                (ia, ia, k_geom, m_aa),
                (ia, ib, -k_geom, m_ab),
                (ib, ia, -k_geom, m_ab),
                (ib, ib, k_geom, m_bb),
            ):
                _accumulate(k_entries, i, j, b_e * kij)
                _accumulate(kt_entries, i, j, kij)
                _accumulate(m_entries, i, j, mij)
            lumped[ia] += l_a
            lumped[ib] += l_b
            if mesh.region[e] == CORE:
                m1[ia] += l_a
                m1[ib] += l_b
                core_volume += i0
    else:
        for e in range(mesh.n_elements):
            idx = [int(v) for v in mesh.elements[e]]
            p = mesh.nodes[idx]
            area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
                          - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
            if area <= 0.0:
                raise GeometryError(f"element {e} has singular geometry")
            # Constant P1 gradients: grad_i = (by_i, cx_i) / (2 area).
            by = np.array([p[1, 1] - p[2, 1], p[2, 1] - p[0, 1], p[0, 1] - p[1, 1]])
            cx = np.array([p[2, 0] - p[1, 0], p[0, 0] - p[2, 0], p[1, 0] - p[0, 0]])
            b_e = b1 if mesh.region[e] == CORE else b2
            for a in range(3):
                for c in range(a, 3):
                    k_geom = (by[a] * by[c] + cx[a] * cx[c]) / (4.0 * area)
                    m_ac = area / 12.0 * (2.0 if a == c else 1.0)
                    pairs = ((idx[a], idx[c]),) if a == c else (
                        (idx[a], idx[c]), (idx[c], idx[a]))
                    for (i, j) in pairs:
                        _accumulate(k_entries, i, j, b_e * k_geom)
                        _accumulate(kt_entries, i, j, k_geom)
                        _accumulate(m_entries, i, j, m_ac)
            lumped[idx] += area / 3.0
            if mesh.region[e] == CORE:
                m1[idx] += area / 3.0
                core_volume += area

    n = mesh.n_nodes

    def to_csr(entries):
        keys = sorted(entries)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((entries[k] for k in keys), dtype=float, count=len(keys))
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    if not reaction:
        m1 = np.zeros(mesh.n_nodes)

    if dirichlet_nodes is None:
        mask = mesh.dirichlet_mask()
    else:
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(dirichlet_nodes, dtype=np.int64)] = True

    return AssembledSystem(
        mesh=mesh,
        K=to_csr(k_entries),
        Kt=to_csr(kt_entries),
        M=to_csr(m_entries),
        M1=m1,
        lumped_mass=lumped,
        mask=mask,
        free=np.flatnonzero(~mask),
        weight_exponent=weight_exponent,
        core_volume=core_volume,
    )


# ----------------------------------------------------------------------------
# discrete operators
# ----------------------------------------------------------------------------


def reaction_vector(system: AssembledSystem, u: DiscreteField, params: ModelParams) -> np.ndarray:
    """Nodal-quadrature consumption load: entry i is M1_i * rate(u_i)."""
    system.check_field(u)
    return system.M1 * consumption_rate(u.values, params)


def energy_gradient(system: AssembledSystem, u: DiscreteField, params: ModelParams) -> np.ndarray:
    """Gradient of the discrete energy: K u - reaction, zeroed at masked nodes.

    By the gradient-flow identity this is also the discrete
    diffusion-reaction operator applied to u; `residual` is the same
    function under that name.
    """
    system.check_field(u)
    g = system.K @ u.values - reaction_vector(system, u, params)
    g[system.mask] = 0.0
    return g


def residual(system: AssembledSystem, u: DiscreteField, params: ModelParams) -> np.ndarray:
    """Unmasked-subspace residual of the stationary problem (zero at the solution)."""
    return energy_gradient(system, u, params)


def energy(system: AssembledSystem, u: DiscreteField, params: ModelParams) -> float:
    """Discrete energy: half the weighted Dirichlet form minus the consumption potential."""
    system.check_field(u)
    quad = 0.5 * float(u.values @ (system.K @ u.values))
    pot = float(system.M1 @ consumption_potential(u.values, params))
    return quad - pot


def reaction_jacobian_diagonal(
    system: AssembledSystem, u: DiscreteField, params: ModelParams
) -> np.ndarray:
    """Diagonal -M1_i * rate'(u_i) of the reaction part of the energy Hessian.

    Nonnegative because the consumption rate is decreasing, so the full
    Hessian K + diag stays positive definite on the free subspace.
    """
    return system.M1 * (-consumption_rate_slope(u.values, params))


def h_norm(system: AssembledSystem, values: np.ndarray) -> float:
    return float(np.sqrt(values @ (system.M @ values)))


def v_norm(system: AssembledSystem, values: np.ndarray) -> float:
    return float(np.sqrt(values @ (system.M @ values) + values @ (system.Kt @ values)))


def dual_norm(system: AssembledSystem, values: np.ndarray) -> float:
    """Lumped-mass dual norm of a residual vector on the free subspace."""
    f = system.free
    return float(np.sqrt(np.sum(values[f] ** 2 / system.lumped_mass[f])))
