"""Slip boundary collocation for exterior Stokes fields.

Each surface node contributes three equations for the unknown Stokeslet
strengths.  With n the node normal (pointing into the body), (t1, t2) the
tangent pair and d the prescribed boundary velocity,

    row 1:      v . n = d . n
    rows 2-3:   (T(v) n) . t_a  +  alpha (v . t_a) = alpha (d . t_a)

The tangential rows use the full traction T n; its pressure part is normal,
so this equals the viscous slip term 2 (D(v) n) . t_a exactly.  Large alpha
drives the solution to the no-slip limit.

The least-squares solve weights every row by sqrt(node weight) so the
minimized quantity is a surface L2 residual, and divides tangential rows by
max(1, alpha) so neither row family dominates as alpha grows.  Truncated
SVD regularizes the exponentially ill-conditioned collocation matrix; the
a-posteriori residuals in :class:`SolveReport` are the honest accuracy
measure and are recomputed from the boundary conditions, not taken from
the least-squares objective.

Boundary data with nonzero net flux cannot be matched by Stokeslets alone
(their velocities are divergence-free with zero flux).  ``solve_lifting``
splits such data: a potential point sink at an interior point carries the
whole flux, normalized so its *discrete* flux through the mesh is exact,
and the Stokeslets fit the zero-flux remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlacementError, SolverError
from .geometry import (
    SurfaceMesh,
    elementary_rigid_motion,
    surface_integral,
    tangential_part,
)
from .stokeslets import (
    FlowField,
    SourceSet,
    point_source_traction,
    point_source_velocity,
    traction_matrix,
    velocity_matrix,
)

__all__ = [
    "BoundaryData",
    "CollocationSystem",
    "SolveReport",
    "SlipSolver",
    "assemble_system",
    "solve_system",
    "solve_auxiliary",
    "solve_lifting",
    "rigid_trace_data",
    "squirmer_data",
    "uniform_flux_data",
    "boundary_data_from_field",
    "data_vector",
    "normalized_carrier",
]

DEFAULT_SVD_TOL = 1e-12
_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class BoundaryData:
    """Prescribed boundary velocity split into normal and tangential parts.

    ``normal_data`` holds the scalars v.n; ``tangential_data`` the tangential
    vectors stored with (numerically) zero normal component.  The split is
    against the normals of the mesh the data was built on; ``assemble_system``
    re-checks orthogonality against its mesh.
    """

    normal_data: np.ndarray
    tangential_data: np.ndarray

    def __post_init__(self):
        dn = np.asarray(self.normal_data, dtype=float)
        dt = np.asarray(self.tangential_data, dtype=float)
        if dn.ndim != 1 or dt.shape != (len(dn), 3):
            raise ValueError("normal_data must be (N,) and tangential_data (N, 3)")
        object.__setattr__(self, "normal_data", dn)
        object.__setattr__(self, "tangential_data", dt)
        dn.setflags(write=False)
        dt.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.normal_data)


def data_vector(data: BoundaryData, mesh: SurfaceMesh) -> np.ndarray:
    """Reassemble the full per-node velocity vectors (v.n) n + v_tau."""
    _check_match(data, mesh)
    return data.normal_data[:, None] * mesh.normals + data.tangential_data


def boundary_data_from_field(mesh: SurfaceMesh, values) -> BoundaryData:
    """Split per-node velocity vectors into normal/tangential boundary data."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes, 3):
        raise ValueError("values must be (N, 3) on the given mesh")
    vn = np.einsum("ij,ij->i", values, mesh.normals)
    return BoundaryData(vn, values - vn[:, None] * mesh.normals)


def rigid_trace_data(mesh: SurfaceMesh, i: int) -> BoundaryData:
    """Boundary trace of the i-th elementary rigid motion (i = 1..6)."""
    return boundary_data_from_field(mesh, elementary_rigid_motion(i, mesh.nodes))


def squirmer_data(mesh: SurfaceMesh, b1: float = 1.0) -> BoundaryData:
    """Tangential squirmer stroke B1 sin(theta) theta_hat about the z axis.

    theta is the polar angle from +z; theta_hat = (cos t cos p, cos t sin p,
    -sin t).  The data is purely tangential on a sphere centered at the
    origin.  With this stroke the classical no-slip swimmer translates
    toward +z at speed (2/3) B1.
    """
    x = mesh.nodes - mesh.centroid
    rho = np.linalg.norm(x, axis=1)
    s = np.linalg.norm(x[:, :2], axis=1)  # rho * sin(theta)
    cos_t = x[:, 2] / rho
    sin_t = s / rho
    # Guard the poles, where theta_hat is ill-defined and sin(theta) = 0 anyway.
    safe = np.where(s > 1e-14, s, 1.0)
    cos_p = np.where(s > 1e-14, x[:, 0] / safe, 1.0)
    sin_p = np.where(s > 1e-14, x[:, 1] / safe, 0.0)
    theta_hat = np.column_stack((cos_t * cos_p, cos_t * sin_p, -sin_t))
    vals = b1 * sin_t[:, None] * theta_hat
    return boundary_data_from_field(mesh, vals)


def uniform_flux_data(mesh: SurfaceMesh, phi: float) -> BoundaryData:
    """Purely normal data with uniform v.n = phi/area, so the total flux is phi."""
    vn = np.full(mesh.n_nodes, phi / mesh.area)
    return BoundaryData(vn, np.zeros((mesh.n_nodes, 3)))


@dataclass(frozen=True)
class CollocationSystem:
    """Assembled dense collocation system.

    Rows are node-major triples (normal row, then the two tangential slip
    rows); ``row_map[j]`` lists the three row indices of node j.  The mesh
    weights and the source set ride along so the system can be solved and
    its solution wrapped into a :class:`FlowField` without the originals.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    row_map: np.ndarray
    alpha: float
    sources: SourceSet
    weights: np.ndarray

    def __post_init__(self):
        n = len(self.row_map)
        if self.matrix.shape[0] != 3 * n or self.rhs.shape != (3 * n,):
            raise ValueError("system must have 3 rows per node")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class SolveReport:
    """A-posteriori diagnostics of a collocation solve.

    ``residual_normal`` is the L2(surface) norm of v.n - d.n;
    ``residual_tangential`` that of the full slip rows
    (T n)_tau + alpha (v - d)_tau.  Dividing the latter by alpha gives the
    tangential velocity mismatch scale, which is the natural comparison
    against ``residual_normal`` in the no-slip regime.
    """

    residual_normal: float
    residual_tangential: float
    svd_rank: int
    condition_estimate: float


def _check_match(data, mesh):
    if data.n_nodes != mesh.n_nodes:
        raise ValueError(
            f"boundary data has {data.n_nodes} nodes, mesh has {mesh.n_nodes}"
        )


def _check_tangential(data: BoundaryData, mesh: SurfaceMesh):
    defect = np.max(
        np.abs(np.einsum("ij,ij->i", data.tangential_data, mesh.normals))
    )
    scale = max(1.0, float(np.max(np.abs(data.tangential_data), initial=0.0)))
    if defect > _ORTHO_TOL * scale:
        raise ValueError(
            f"tangential_data is not orthogonal to the mesh normals (defect {defect:.2e})"
        )


def _build_rhs(mesh: SurfaceMesh, alpha: float, data: BoundaryData) -> np.ndarray:
    rhs = np.empty(3 * mesh.n_nodes)
    rhs[0::3] = data.normal_data
    rhs[1::3] = alpha * np.einsum("ij,ij->i", mesh.tangent1, data.tangential_data)
    rhs[2::3] = alpha * np.einsum("ij,ij->i", mesh.tangent2, data.tangential_data)
    return rhs


def _build_matrix(mesh: SurfaceMesh, vmat: np.ndarray, tmat: np.ndarray, alpha: float):
    n, k3 = mesh.n_nodes, vmat.shape[1]
    vr = vmat.reshape(n, 3, k3)
    tr = tmat.reshape(n, 3, k3)
    a = np.empty((3 * n, k3))
    a[0::3] = np.einsum("ja,jaC->jC", mesh.normals, vr)
    a[1::3] = np.einsum("ja,jaC->jC", mesh.tangent1, tr)
    a[1::3] += alpha * np.einsum("ja,jaC->jC", mesh.tangent1, vr)
    a[2::3] = np.einsum("ja,jaC->jC", mesh.tangent2, tr)
    a[2::3] += alpha * np.einsum("ja,jaC->jC", mesh.tangent2, vr)
    return a


def _row_scale(weights: np.ndarray, alpha: float) -> np.ndarray:
    sw = np.sqrt(weights)
    scale = np.empty(3 * len(weights))
    scale[0::3] = sw
    scale[1::3] = sw / max(1.0, alpha)
    scale[2::3] = sw / max(1.0, alpha)
    return scale


def assemble_system(
    mesh: SurfaceMesh, sources: SourceSet, alpha: float, data: BoundaryData
) -> CollocationSystem:
    """Assemble the dense (3N x 3K) slip collocation system.

    The matrix is kept in the unscaled physical form described in the module
    docstring; the least-squares row weighting happens inside the solve.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_match(data, mesh)
    _check_tangential(data, mesh)
    vmat = velocity_matrix(mesh.nodes, sources)
    tmat = traction_matrix(mesh.nodes, mesh.normals, sources)
    matrix = _build_matrix(mesh, vmat, tmat, alpha)
    rhs = _build_rhs(mesh, alpha, data)
    row_map = np.arange(3 * mesh.n_nodes).reshape(mesh.n_nodes, 3)
    return CollocationSystem(matrix, rhs, row_map, alpha, sources, mesh.weights)


def _truncated_svd_solve(a_scaled, b_scaled, svd_tol):
    if not 0.0 < svd_tol < 1.0:
        raise ValueError(f"svd_tol must lie in (0, 1), got {svd_tol}")
    u, s, vt = np.linalg.svd(a_scaled, full_matrices=False)
    if s[0] == 0.0:
        raise SolverError("collocation matrix is identically zero")
    rank = int(np.count_nonzero(s >= svd_tol * s[0]))
    if rank == 0:
        raise SolverError("truncated SVD kept no singular values; system is degenerate")
    x = vt[:rank].T @ ((u[:, :rank].T @ b_scaled) / s[:rank])
    return x, rank, float(s[0] / s[rank - 1])


def _residual_norms(residual, weights, alpha):
    rn = residual[0::3]
    rt = residual[1::3] ** 2 + residual[2::3] ** 2
    return (
        float(np.sqrt(np.sum(weights * rn**2))),
        float(np.sqrt(np.sum(weights * rt))),
    )


def solve_system(system: CollocationSystem, svd_tol: float = DEFAULT_SVD_TOL):
    """Solve an assembled system by row-weighted truncated-SVD least squares.

    Returns (FlowField, SolveReport).  Residuals come from re-applying the
    unscaled boundary rows to the solution.
    """
    scale = _row_scale(system.weights, system.alpha)
    x, rank, cond = _truncated_svd_solve(
        system.matrix * scale[:, None], system.rhs * scale, svd_tol
    )
    res_n, res_t = _residual_norms(
        system.matrix @ x - system.rhs, system.weights, system.alpha
    )
    field = FlowField(system.sources, x.reshape(-1, 3))
    return field, SolveReport(res_n, res_t, rank, cond)


class SlipSolver:
    """Factorized collocation operator for one (mesh, sources, alpha) triple.

    The SVD of the row-weighted matrix is computed once and reused for any
    number of right-hand sides, which is what makes the six auxiliary solves
    plus the lifting solve cheap.  Also caches the node velocity/traction
    matrices for fast a-posteriori residuals and traction extraction.
    """

    def __init__(self, mesh, sources, alpha, svd_tol=DEFAULT_SVD_TOL):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if not 0.0 < svd_tol < 1.0:
            raise ValueError(f"svd_tol must lie in (0, 1), got {svd_tol}")
        self.mesh = mesh
        self.sources = sources
        self.alpha = float(alpha)
        self.svd_tol = float(svd_tol)
        n, k3 = mesh.n_nodes, 3 * sources.count
        self._vr = velocity_matrix(mesh.nodes, sources).reshape(n, 3, k3)
        self._tr = traction_matrix(mesh.nodes, mesh.normals, sources).reshape(n, 3, k3)
        a = _build_matrix(mesh, self._vr.reshape(3 * n, k3), self._tr.reshape(3 * n, k3), alpha)
        scale = _row_scale(mesh.weights, alpha)
        a *= scale[:, None]
        self._scale = scale
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        del a
        if s[0] == 0.0:
            raise SolverError("collocation matrix is identically zero")
        rank = int(np.count_nonzero(s >= svd_tol * s[0]))
        if rank == 0:
            raise SolverError("truncated SVD kept no singular values")
        self._u = u[:, :rank]
        self._s = s[:rank]
        self._vt = vt[:rank]
        self.svd_rank = rank
        self.condition_estimate = float(s[0] / s[rank - 1])

    def _solve_rhs(self, rhs):
        b = rhs * self._scale
        return self._vt.T @ ((self._u.T @ b) / self._s)

    def node_velocity(self, field: FlowField) -> np.ndarray:
        """Velocity of ``field`` at the mesh nodes via the cached matrix."""
        u = np.einsum("jaC,C->ja", self._vr, field.strengths.ravel())
        if field.source_flux != 0.0:
            u = u + field.source_flux * point_source_velocity(
                field.source_point, self.mesh.nodes
            )
        return u

    def node_traction(self, field: FlowField) -> np.ndarray:
        """Traction T n of ``field`` at the mesh nodes via the cached matrix."""
        t = np.einsum("jaC,C->ja", self._tr, field.strengths.ravel())
        if field.source_flux != 0.0:
            t = t + field.source_flux * point_source_traction(
                field.source_point, self.mesh.nodes, self.mesh.normals
            )
        return t

    def solve_data(self, data: BoundaryData):
        """Solve for the given boundary data; returns (FlowField, SolveReport)."""
        _check_match(data, self.mesh)
        _check_tangential(data, self.mesh)
        rhs = _build_rhs(self.mesh, self.alpha, data)
        x = self._solve_rhs(rhs)
        field = FlowField(self.sources, x.reshape(-1, 3))
        report = self._report(field, data)
        return field, report

    def _report(self, field, data):
        u = self.node_velocity(field)
        t = self.node_traction(field)
        m = self.mesh
        full = data_vector(data, m)
        rn = np.einsum("ij,ij->i", u - full, m.normals)
        mis = t + self.alpha * (u - full)
        r1 = np.einsum("ij,ij->i", mis, m.tangent1)
        r2 = np.einsum("ij,ij->i", mis, m.tangent2)
        res_n = float(np.sqrt(np.sum(m.weights * rn**2)))
        res_t = float(np.sqrt(np.sum(m.weights * (r1**2 + r2**2))))
        return SolveReport(res_n, res_t, self.svd_rank, self.condition_estimate)


def solve_auxiliary(
    i: int,
    mesh: SurfaceMesh,
    sources: SourceSet,
    alpha: float,
    svd_tol: float = DEFAULT_SVD_TOL,
    solver: SlipSolver | None = None,
):
    """Solve the i-th auxiliary problem: slip BVP with the trace of the
    i-th elementary rigid motion as data.  Returns (FlowField, SolveReport).

    Pass a prebuilt :class:`SlipSolver` to amortize the factorization over
    several solves.
    """
    if solver is None:
        solver = SlipSolver(mesh, sources, alpha, svd_tol)
    return solver.solve_data(rigid_trace_data(mesh, i))


def _inside_body(mesh: SurfaceMesh, x0) -> bool:
    x0 = np.asarray(x0, dtype=float).reshape(3)
    j = int(np.argmin(np.linalg.norm(mesh.nodes - x0[None, :], axis=1)))
    return float((x0 - mesh.nodes[j]) @ mesh.normals[j]) > 0.0


def normalized_carrier(mesh: SurfaceMesh, x0):
    """Flux-carrier trace at the nodes, normalized to unit discrete flux.

    Returns (sigma_hat, strength) where sigma_hat = strength * sink_kernel
    evaluated at the nodes and sum_k w_k sigma_hat_k . n_k = 1 exactly on
    this mesh.  ``strength`` is the coefficient of the raw unit-flux sink.
    """
    x0 = np.asarray(x0, dtype=float).reshape(3)
    if not _inside_body(mesh, x0):
        raise PlacementError("carrier point must lie strictly inside the body")
    raw = point_source_velocity(x0, mesh.nodes)
    s_disc = float(
        surface_integral(mesh, np.einsum("ij,ij->i", raw, mesh.normals))
    )
    # The continuum flux is +1 with the into-body normal convention, so
    # s_disc ~ 1; a sign flip or a tiny value means x0 left the body.
    if abs(s_disc) < 0.5:
        raise PlacementError(
            f"discrete carrier flux {s_disc:.3g} is far from 1; bad carrier point"
        )
    return raw / s_disc, 1.0 / s_disc


def solve_lifting(
    v_star: BoundaryData,
    mesh: SurfaceMesh,
    sources: SourceSet,
    alpha: float,
    svd_tol: float = DEFAULT_SVD_TOL,
    x0=None,
    solver: SlipSolver | None = None,
):
    """Lift arbitrary boundary data to an exterior Stokes field.

    If the data carries net flux phi, a point sink at ``x0`` (default: the
    centroid) absorbs it: the sink's discrete flux is normalized to phi
    exactly and its boundary trace (velocity and slip-row traction) is
    subtracted from the data before the Stokeslet fit.  By linearity the
    reported residuals are those of the complete composite field against
    the original data.  Returns (FlowField, SolveReport).
    """
    if solver is None:
        solver = SlipSolver(mesh, sources, alpha, svd_tol)
    _check_match(v_star, mesh)
    phi = surface_integral(mesh, v_star.normal_data)
    flux_floor = 1e-12 * mesh.area * max(1.0, float(np.max(np.abs(v_star.normal_data), initial=0.0)))
    if abs(phi) <= flux_floor:
        return solver.solve_data(v_star)

    x0 = mesh.centroid if x0 is None else np.asarray(x0, dtype=float).reshape(3)
    sigma_hat, unit_strength = normalized_carrier(mesh, x0)
    c_src = phi * unit_strength
    sink_traction = c_src * point_source_traction(x0, mesh.nodes, mesh.normals)
    carrier = phi * sigma_hat

    dn = v_star.normal_data - np.einsum("ij,ij->i", carrier, mesh.normals)
    dt = (
        v_star.tangential_data
        - tangential_part(carrier, mesh.normals)
        - tangential_part(sink_traction, mesh.normals) / alpha
    )
    reduced = BoundaryData(dn, dt)
    stokeslet_field, report = solver.solve_data(reduced)
    field = FlowField(
        solver.sources, stokeslet_field.strengths, source_flux=c_src, source_point=x0
    )
    return field, report
