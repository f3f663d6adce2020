"""Cracked domains, broken P1 spaces, crack motions, Korn estimates.

The domain is a rectangle (or an interval in the 1D degenerate case)
meshed by a structured triangulation.  The crack is a polyline along
mesh edges with a monotone arclength schedule t -> s(t); the discrete
crack extent at time t rounds s(t) *down* to the last path vertex, so
the open seam is always a union of whole mesh edges and the family of
broken spaces is exactly nested in time.

Displacement jumps are realized by duplicating seam vertices: around
each path vertex the incident triangles are grouped into components
connected through non-seam edges, and every component beyond the first
receives a fresh node.  A vertex strictly behind the tip splits into
two components; the tip vertex stays whole, which pins the jump to zero
there as the trace continuity of the continuum space requires.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SNAP_TOL = 1e-9

# ---------- Domains ----------

_EDGE_NAMES_2D = ("left", "right", "bottom", "top")
_EDGE_NAMES_1D = ("left", "right")


@dataclass(frozen=True)
class Domain2D:
    """Axis-aligned rectangle with per-edge boundary condition tags."""

    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0
    dirichlet: tuple = ()

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("degenerate rectangle")
        for name in self.dirichlet:
            if name not in _EDGE_NAMES_2D:
                raise ValueError(f"unknown boundary edge {name!r}")

    @property
    def dim(self):
        return 2


@dataclass(frozen=True)
class Domain1D:
    """Interval with endpoint condition tags; the 1D degenerate case."""

    x_min: float = 0.0
    x_max: float = 1.0
    dirichlet: tuple = ()

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("degenerate interval")
        for name in self.dirichlet:
            if name not in _EDGE_NAMES_1D:
                raise ValueError(f"unknown boundary end {name!r}")

    @property
    def dim(self):
        return 1


# ---------- Meshes ----------

@dataclass
class Mesh:
    """Structured simplicial mesh.

    cells holds vertex ids per simplex (CCW triangles in 2D, left-right
    segments in 1D); grads the constant barycentric gradients per cell,
    shape (n_cells, dim+1, dim).
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    cell_volumes: np.ndarray
    grads: np.ndarray
    shape: tuple = ()

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]


def _triangle_geometry(vertices, cells):
    p = vertices[cells]                     # (ne, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    # gradient of barycentric coordinates: rows of the inverse Jacobian
    grads = np.empty((cells.shape[0], 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return area, grads


def build_mesh(domain, h):
    """Structured mesh with target spacing h (uniform per axis)."""
    if h <= 0:
        raise ValueError("mesh size must be positive")
    if domain.dim == 1:
        n = max(1, round((domain.x_max - domain.x_min) / h))
        xs = np.linspace(domain.x_min, domain.x_max, n + 1)
        vertices = xs[:, None]
        cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        lengths = xs[1:] - xs[:-1]
        grads = np.empty((n, 2, 1))
        grads[:, 0, 0] = -1.0 / lengths
        grads[:, 1, 0] = 1.0 / lengths
        return Mesh(1, vertices, cells, lengths.copy(), grads, shape=(n,))

    nx = max(1, round((domain.x_max - domain.x_min) / h))
    ny = max(1, round((domain.y_max - domain.y_min) / h))
    xs = np.linspace(domain.x_min, domain.x_max, nx + 1)
    ys = np.linspace(domain.y_min, domain.y_max, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def vid(ix, iy):
        return iy * (nx + 1) + ix

    cells = []
    for iy in range(ny):
        for ix in range(nx):
            v00 = vid(ix, iy)
            v10 = vid(ix + 1, iy)
            v01 = vid(ix, iy + 1)
            v11 = vid(ix + 1, iy + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cells = np.asarray(cells, dtype=np.int64)
    area, grads = _triangle_geometry(vertices, cells)
    return Mesh(2, vertices, cells, area, grads, shape=(nx, ny))


def boundary_node_mask(mesh, domain, edges=None):
    """Mask over mesh vertices lying on the named boundary edges.

    edges=None means the whole boundary.
    """
    v = mesh.vertices
    tol = _SNAP_TOL * max(1.0, np.abs(v).max())
    if mesh.dim == 1:
        names = _EDGE_NAMES_1D if edges is None else edges
        mask = np.zeros(mesh.n_vertices, dtype=bool)
        if "left" in names:
            mask |= np.abs(v[:, 0] - domain.x_min) <= tol
        if "right" in names:
            mask |= np.abs(v[:, 0] - domain.x_max) <= tol
        return mask
    names = _EDGE_NAMES_2D if edges is None else edges
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    if "left" in names:
        mask |= np.abs(v[:, 0] - domain.x_min) <= tol
    if "right" in names:
        mask |= np.abs(v[:, 0] - domain.x_max) <= tol
    if "bottom" in names:
        mask |= np.abs(v[:, 1] - domain.y_min) <= tol
    if "top" in names:
        mask |= np.abs(v[:, 1] - domain.y_max) <= tol
    return mask


# ---------- Crack path and schedule ----------

class CrackSchedule:
    """Monotone tip arclength t -> s(t).

    Either linear (s0 + speed*t, speed >= 0) or a table of (t, s) pairs
    with nondecreasing columns, interpolated linearly and clamped
    outside the table range.
    """

    def __init__(self, kind, params):
        self.kind = kind
        if kind == "linear":
            s0, speed = params
            if s0 < 0 or speed < 0:
                raise ValueError("schedule needs s0 >= 0 and speed >= 0")
            self.s0 = float(s0)
            self.speed = float(speed)
        elif kind == "table":
            pts = np.asarray(params, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
                raise ValueError("schedule table needs >= 2 (t, s) pairs")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError("schedule table times must increase")
            if np.any(np.diff(pts[:, 1]) < 0):
                raise ValueError("schedule table must be nondecreasing in s")
            if pts[0, 1] < 0:
                raise ValueError("schedule table needs s >= 0")
            self.table = pts
        else:
            raise ValueError(f"unknown schedule kind {kind!r}")

    @classmethod
    def linear(cls, s0, speed):
        return cls("linear", (s0, speed))

    @classmethod
    def from_table(cls, pairs):
        return cls("table", pairs)

    def tip(self, t):
        if self.kind == "linear":
            return self.s0 + self.speed * max(float(t), 0.0)
        tab = self.table
        return float(np.interp(t, tab[:, 0], tab[:, 1]))

    def rate(self, t):
        """Tip speed ds/dt; right-sided at table knots."""
        if self.kind == "linear":
            return self.speed
        tab = self.table
        t = float(t)
        i = int(np.searchsorted(tab[:, 0], t, side="right")) - 1
        i = min(max(i, 0), tab.shape[0] - 2)
        if t >= tab[-1, 0] or t <= tab[0, 0]:
            return 0.0
        return (tab[i + 1, 1] - tab[i, 1]) / (tab[i + 1, 0] - tab[i, 0])

    def max_tip(self, T):
        return self.tip(T)

    def lipschitz(self, T):
        if self.kind == "linear":
            return self.speed
        tab = self.table
        slopes = np.diff(tab[:, 1]) / np.diff(tab[:, 0])
        return float(slopes.max(initial=0.0))


@dataclass
class CrackPath:
    """Polyline crack in 2D, or a single breakable point in 1D.

    2D points must land on mesh vertices with axis-aligned segments;
    snapping is checked, not silently performed.
    """

    points: np.ndarray
    schedule: CrackSchedule

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass
class SnappedPath:
    """Crack path resolved onto mesh vertices."""

    vertex_ids: np.ndarray       # consecutive mesh vertices along the path
    arclengths: np.ndarray       # cumulative arclength at each vertex
    length: float
    straight: bool
    origin: np.ndarray
    direction: np.ndarray        # unit vector, meaningful when straight

    @property
    def edge_arc_end(self):
        return self.arclengths[1:]

    def point_at(self, s):
        """Coordinates of the path point at arclength s (piecewise linear)."""
        s = np.clip(s, 0.0, self.length)
        # only used for straight paths and validator sampling
        return self.origin + s * self.direction


def snap_path(mesh, domain, path):
    """Resolve a CrackPath onto the mesh; validates alignment.

    Returns a SnappedPath whose vertex chain walks every mesh vertex on
    the polyline.  Raises ValueError when a polyline vertex misses the
    grid, a segment is not axis-aligned, or the entry point is not on
    the boundary.
    """
    if mesh.dim != 2:
        raise ValueError("snap_path applies to 2D meshes")
    nx, ny = mesh.shape
    xs = np.unique(mesh.vertices[:, 0])
    ys = np.unique(mesh.vertices[:, 1])
    tol = _SNAP_TOL * max(1.0, np.abs(mesh.vertices).max())

    def grid_index(value, axis_vals, label):
        i = int(np.argmin(np.abs(axis_vals - value)))
        if abs(axis_vals[i] - value) > tol:
            raise ValueError(
                f"crack vertex {label} = {value} is not on a mesh line")
        return i

    chain = []
    pts = path.points
    if pts.shape[0] < 2:
        raise ValueError("2D crack path needs at least two vertices")
    for seg in range(pts.shape[0] - 1):
        ix0 = grid_index(pts[seg, 0], xs, "x")
        iy0 = grid_index(pts[seg, 1], ys, "y")
        ix1 = grid_index(pts[seg + 1, 0], xs, "x")
        iy1 = grid_index(pts[seg + 1, 1], ys, "y")
        if ix0 == ix1 and iy0 == iy1:
            raise ValueError("zero-length crack segment")
        if ix0 != ix1 and iy0 != iy1:
            raise ValueError("crack segments must be axis-aligned")
        step_x = np.sign(ix1 - ix0)
        step_y = np.sign(iy1 - iy0)
        ix, iy = ix0, iy0
        while True:
            vid = iy * (nx + 1) + ix
            if chain and chain[-1] == vid:
                pass
            else:
                chain.append(vid)
            if ix == ix1 and iy == iy1:
                break
            ix += step_x
            iy += step_y
    chain = np.asarray(chain, dtype=np.int64)
    if len(np.unique(chain)) != len(chain):
        raise ValueError("crack path revisits a mesh vertex")

    coords = mesh.vertices[chain]
    seglen = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    arcs = np.concatenate([[0.0], np.cumsum(seglen)])

    on_bdry = boundary_node_mask(mesh, domain)
    if not on_bdry[chain[0]]:
        raise ValueError("crack path must enter from the boundary")
    if np.any(on_bdry[chain[1:]]):
        raise ValueError("crack path may touch the boundary only at entry")

    d = coords[-1] - coords[0]
    nrm = np.linalg.norm(d)
    direction = d / nrm
    offsets = coords - coords[0]
    straight = bool(np.max(np.abs(offsets - np.outer(offsets @ direction,
                                                     direction))) <= tol)
    return SnappedPath(vertex_ids=chain, arclengths=arcs,
                       length=float(arcs[-1]), straight=straight,
                       origin=coords[0].copy(), direction=direction)


def rounded_extent(snapped, s):
    """Largest path-vertex arclength <= s (discrete tip position)."""
    arcs = snapped.arclengths
    idx = int(np.searchsorted(arcs, s + 1e-12 * max(1.0, snapped.length),
                              side="right")) - 1
    return float(arcs[max(idx, 0)])


# ---------- Broken P1 spaces ----------

@dataclass
class BrokenSpace:
    """Vector P1 space on a mesh with seam vertices duplicated.

    cell_nodes maps each cell corner to a node id; node ids 0..nv-1 are
    the base mesh vertices, duplicates follow.  Scalar nodes carry dim
    components, interleaved: dof = node*dim + component.
    """

    mesh: Mesh
    domain: object
    snapped: object              # SnappedPath | None (1D: break vertex id)
    s_open: float
    n_nodes: int
    cell_nodes: np.ndarray
    node_base_vertex: np.ndarray
    duplicated_vertices: tuple
    _dirichlet_mask: np.ndarray = field(default=None, repr=False)
    _free_dofs: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def n_dofs(self):
        return self.n_nodes * self.mesh.dim

    @property
    def node_coords(self):
        return self.mesh.vertices[self.node_base_vertex]

    @property
    def dirichlet_node_mask(self):
        if self._dirichlet_mask is None:
            base = boundary_node_mask(self.mesh, self.domain,
                                      self.domain.dirichlet)
            self._dirichlet_mask = base[self.node_base_vertex]
        return self._dirichlet_mask

    @property
    def dirichlet_dof_mask(self):
        return np.repeat(self.dirichlet_node_mask, self.mesh.dim)

    @property
    def free_dofs(self):
        if self._free_dofs is None:
            self._free_dofs = np.flatnonzero(~self.dirichlet_dof_mask)
        return self._free_dofs


def _vertex_cells(mesh):
    """vertex id -> list of incident cell ids."""
    out = [[] for _ in range(mesh.n_vertices)]
    for c, cell in enumerate(mesh.cells):
        for v in cell:
            out[v].append(c)
    return out


def build_broken_space(mesh, domain, snapped, s):
    """Broken P1 space for crack extent s (rounded down to a vertex).

    snapped is a SnappedPath (2D), a break vertex id (1D), or None for
    an uncracked space.
    """
    cells = mesh.cells
    nv = mesh.n_vertices
    if snapped is None:
        return BrokenSpace(mesh, domain, None, 0.0, nv, cells.copy(),
                           np.arange(nv), ())

    if mesh.dim == 1:
        vb = int(snapped)
        if not 0 < vb < nv - 1:
            raise ValueError("1D break point must be interior")
        opened = s > 0.0
        cell_nodes = cells.copy()
        base = np.arange(nv)
        dups = ()
        n_nodes = nv
        if opened:
            # cells right of the break point see the duplicate
            new_id = nv
            for c in range(vb, mesh.n_cells):
                for k in range(2):
                    if cell_nodes[c, k] == vb:
                        cell_nodes[c, k] = new_id
            base = np.concatenate([base, [vb]])
            n_nodes = nv + 1
            dups = (vb,)
        return BrokenSpace(mesh, domain, snapped, float(s > 0.0), n_nodes,
                           cell_nodes, base, dups)

    s_round = rounded_extent(snapped, s)
    tol = 1e-12 * max(1.0, snapped.length)
    open_edges = set()
    chain = snapped.vertex_ids
    for k, arc_end in enumerate(snapped.edge_arc_end):
        if arc_end <= s_round + tol:
            open_edges.add(frozenset((int(chain[k]), int(chain[k + 1]))))

    cell_nodes = cells.copy()
    base = list(range(nv))
    dups = []
    next_id = nv
    incident = _vertex_cells(mesh)

    for v in chain:
        v = int(v)
        local = incident[v]
        if len(local) <= 1:
            continue
        # union-find over incident cells; connect through shared edges
        # at v that are not open seam edges
        parent = {c: c for c in local}

        def find(c):
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        edge_owner = {}
        for c in local:
            for w in cells[c]:
                w = int(w)
                if w == v:
                    continue
                key = frozenset((v, w))
                if key in open_edges:
                    continue
                if key in edge_owner:
                    ra, rb = find(edge_owner[key]), find(c)
                    if ra != rb:
                        parent[ra] = rb
                else:
                    edge_owner[key] = c
        comps = {}
        for c in local:
            comps.setdefault(find(c), []).append(c)
        if len(comps) < 2:
            continue
        groups = sorted(comps.values(), key=min)
        dups.append(v)
        for extra in groups[1:]:
            for c in extra:
                for k in range(3):
                    if cell_nodes[c, k] == v:
                        cell_nodes[c, k] = next_id
            base.append(v)
            next_id += 1

    return BrokenSpace(mesh, domain, snapped, s_round, next_id, cell_nodes,
                       np.asarray(base, dtype=np.int64), tuple(dups))


def uncracked_space(mesh, domain):
    return build_broken_space(mesh, domain, None, 0.0)


def space_inclusion_map(coarse, fine):
    """Node transfer table realizing the inclusion of broken spaces.

    Returns parent, an int array of length fine.n_nodes, where fine node
    j carries the value of coarse node parent[j].  A vertex duplicated
    in fine but not in coarse maps both copies to the single coarse
    node, which is the continuous (tied value) transfer at release.
    """
    if coarse.mesh is not fine.mesh:
        raise ValueError("spaces live on different meshes")
    if coarse.s_open > fine.s_open + 1e-12:
        raise ValueError("inclusion runs from smaller to larger crack extent")
    parent = np.full(fine.n_nodes, -1, dtype=np.int64)
    for c in range(fine.mesh.n_cells):
        for k in range(fine.mesh.dim + 1):
            fn = fine.cell_nodes[c, k]
            cn = coarse.cell_nodes[c, k]
            if parent[fn] == -1:
                parent[fn] = cn
            elif parent[fn] != cn:
                raise ValueError("inconsistent seam components; spaces "
                                 "are not nested")
    return parent


def prolong(parent, vec, dim):
    """Apply a node transfer table to an interleaved dof vector."""
    arr = np.asarray(vec, dtype=float).reshape(-1, dim)
    return arr[parent].reshape(-1)


# ---------- Crack motions ----------

def _smoothstep(u):
    """Quintic smoothstep: C^2 with flat ends on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_d(u):
    u = np.clip(u, 0.0, 1.0)
    return 30.0 * u * u * (1.0 - u) ** 2


class _PathBump:
    """C^2 bump w on [0, L]: 0 on the collars, 1 at the reference tip."""

    def __init__(self, xi_a, s0, xi_b):
        if not xi_a < s0 < xi_b:
            raise ValueError("bump knots must satisfy xi_a < s0 < xi_b")
        self.xi_a, self.s0, self.xi_b = xi_a, s0, xi_b

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        up = _smoothstep((xi - self.xi_a) / (self.s0 - self.xi_a))
        down = _smoothstep((self.xi_b - xi) / (self.xi_b - self.s0))
        return np.where(xi <= self.s0, up, down)

    def deriv(self, xi):
        xi = np.asarray(xi, dtype=float)
        up = _smoothstep_d((xi - self.xi_a) / (self.s0 - self.xi_a)) \
            / (self.s0 - self.xi_a)
        down = -_smoothstep_d((self.xi_b - xi) / (self.xi_b - self.s0)) \
            / (self.xi_b - self.s0)
        return np.where(xi <= self.s0, up, down)

    def max_abs_deriv(self):
        # max of smoothstep_d is 15/8 at u = 1/2
        return 1.875 * max(1.0 / (self.s0 - self.xi_a),
                           1.0 / (self.xi_b - self.s0))


@dataclass
class CrackMotion:
    """A time-dependent diffeomorphism pair carrying the crack.

    phi(t, pts) pushes material points forward, psi inverts it, and
    phi_dot is the velocity of phi.  det_min/det_max bound the Jacobian
    determinant of psi over the sampled domain and time range.
    """

    phi: object
    psi: object
    phi_dot: object
    det_min: float = 1.0
    det_max: float = 1.0


def identity_motion():
    """The trivial motion: valid only for a stationary crack."""
    return CrackMotion(phi=lambda t, p: np.array(p, dtype=float, copy=True),
                       psi=lambda t, p: np.array(p, dtype=float, copy=True),
                       phi_dot=lambda t, p: np.zeros_like(
                           np.asarray(p, dtype=float)),
                       det_min=1.0, det_max=1.0)


def stretch_motion(domain, snapped, schedule, T):
    """Stretch map along a straight crack path, identity elsewhere.

    Points move by (s(t) - s(0)) * w(xi) * chi(eta) in the path
    direction, where (xi, eta) are path coordinates, w a C^2 bump which
    equals 1 at the reference tip and vanishes on collars at both path
    ends, and chi a C^2 cutoff in the normal direction.  The map fixes
    a neighborhood of the boundary, carries the path to itself, and
    moves the reference tip to the scheduled tip.
    """
    if not snapped.straight:
        raise ValueError("stretch_motion requires a straight crack path")
    e = snapped.direction
    n = np.array([-e[1], e[0]])
    p0 = snapped.origin
    s0 = schedule.tip(0.0)
    s_max = schedule.max_tip(T)
    if s0 <= 0.0:
        raise ValueError("stretch_motion needs a nonempty initial crack")

    # room along the path direction until the boundary ahead
    corners = np.array([[domain.x_min, domain.y_min],
                        [domain.x_max, domain.y_min],
                        [domain.x_min, domain.y_max],
                        [domain.x_max, domain.y_max]])
    xi_room = ((corners - p0) @ e).max()
    if s_max >= xi_room - _SNAP_TOL:
        raise ValueError("scheduled tip leaves the domain")

    xi_a = 0.5 * s0
    xi_b = 0.5 * (max(s_max, snapped.length) + xi_room)
    bump = _PathBump(xi_a, s0, xi_b)

    # normal clearance: distance from the stretched span to the nearest
    # boundary in the +-n directions
    span = np.array([p0 + xi_a * e, p0 + xi_b * e])
    clearance = np.inf
    for sgn in (1.0, -1.0):
        for q in span:
            hits = ((corners - q) @ (sgn * n))
            clearance = min(clearance, hits[hits > _SNAP_TOL].min(
                initial=np.inf))
    r = 0.45 * clearance
    if not np.isfinite(r) or r <= 0:
        raise ValueError("no normal clearance for the stretch cutoff")

    # Jacobian determinant is 1 + ds * w'(xi) * chi(eta); for growth
    # (ds >= 0) only the down-slope of the bump compresses, for
    # shrinkage only the up-slope does.  Bound the worst case.
    tips = np.array([schedule.tip(t)
                     for t in np.linspace(0.0, T, 65)]) - s0
    ds_max = float(np.max(tips, initial=0.0))
    ds_min = float(np.min(tips, initial=0.0))
    shrink = max(ds_max * 1.875 / (xi_b - s0),
                 -ds_min * 1.875 / (s0 - xi_a))
    if shrink >= 0.95:
        raise ValueError("stretch amplitude too large for invertibility")

    def coords(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - p0
        return rel @ e, rel @ n, pts.shape

    def chi(eta):
        return _smoothstep(1.0 - np.abs(eta) / r)

    def assemble(xi, eta, shape):
        out = p0 + np.outer(xi, e) + np.outer(eta, n)
        return out.reshape(shape)

    def phi(t, pts):
        xi, eta, shape = coords(pts)
        disp = (schedule.tip(t) - s0) * bump(xi) * chi(eta)
        return assemble(xi + disp, eta, shape)

    def phi_dot(t, pts):
        xi, eta, shape = coords(pts)
        speed = schedule.rate(t) * bump(xi) * chi(eta)
        return np.outer(speed, e).reshape(shape)

    def psi(t, pts):
        # invert xi + ds*w(xi)*chi: strictly increasing in xi (the
        # invertibility guard keeps its slope >= 0.05), so a
        # bisection-safeguarded Newton from the displacement bracket
        # always converges.
        xi_img, eta, shape = coords(pts)
        ds = schedule.tip(t) - s0
        c = chi(eta)
        lo = xi_img - max(ds, 0.0)
        hi = xi_img + max(-ds, 0.0)
        xi = xi_img.copy()
        scale = max(1.0, float(np.max(np.abs(xi_img), initial=0.0)))
        for _ in range(200):
            g = xi + ds * bump(xi) * c - xi_img
            lo = np.where(g <= 0.0, xi, lo)
            hi = np.where(g >= 0.0, xi, hi)
            gp = 1.0 + ds * bump.deriv(xi) * c
            nxt = xi - g / gp
            # bisect any step that is not strictly interior to the
            # bracket; a plain range test lets Newton cycle between the
            # bracket endpoints across the bump's cliff
            off = ~((nxt > lo) & (nxt < hi))
            nxt = np.where(off, 0.5 * (lo + hi), nxt)
            done = np.max(np.abs(nxt - xi)) < 1e-15 * scale
            xi = nxt
            if done:
                break
        return assemble(xi, eta, shape)

    # Jacobian determinant of phi is 1 + ds*w'(xi)*chi(eta); bound it on
    # a sample grid in (xi, t)
    xis = np.linspace(0.0, xi_b, 201)
    dets = []
    for t in np.linspace(0.0, T, 33):
        ds = schedule.tip(t) - s0
        dets.append(1.0 + ds * bump.deriv(xis) * 1.0)
    dets = np.asarray(dets)
    det_phi_min, det_phi_max = float(dets.min()), float(dets.max())
    return CrackMotion(phi=phi, psi=psi, phi_dot=phi_dot,
                       det_min=1.0 / det_phi_max, det_max=1.0 / det_phi_min)


@dataclass
class MotionReport:
    """Sampled consistency checks of a crack motion."""

    ok: bool
    initial_defect: float
    inverse_defect: float
    on_path_defect: float
    tip_defect: float
    collar_defect: float


def check_motion_consistency(motion, snapped, schedule, domain, T,
                             tol=1e-8, n_samples=41):
    """Verify on samples that the motion carries the crack correctly.

    Checks: phi(0) is the identity; psi inverts phi; initial crack
    points stay on the path with arclength at most the scheduled tip;
    the reference tip lands on the scheduled tip; boundary points do
    not move.  All within tol.
    """
    s0 = schedule.tip(0.0)
    ts = np.linspace(0.0, T, 9)
    span = np.linspace(0.0, min(s0, snapped.length), n_samples)
    crack_pts = snapped.origin + np.outer(span, snapped.direction)
    corners = np.array([[domain.x_min, domain.y_min],
                        [domain.x_max, domain.y_min],
                        [domain.x_max, domain.y_max],
                        [domain.x_min, domain.y_max]])
    edges = np.concatenate([
        np.linspace(corners[i], corners[(i + 1) % 4], 17)
        for i in range(4)])

    e = snapped.direction
    init_defect = float(np.max(np.abs(motion.phi(0.0, crack_pts) - crack_pts)))
    inv = on_path = tipd = collar = 0.0
    tip0 = snapped.origin + s0 * e
    for t in ts:
        img = motion.phi(t, crack_pts)
        inv = max(inv, float(np.max(np.abs(motion.psi(t, img) - crack_pts))))
        rel = img - snapped.origin
        xi = rel @ e
        off = rel - np.outer(xi, e)
        on_path = max(on_path, float(np.max(np.abs(off))))
        s_t = schedule.tip(t)
        on_path = max(on_path, float(max(np.max(xi) - s_t, 0.0)))
        on_path = max(on_path, float(max(-np.min(xi), 0.0)))
        tip_img = motion.phi(t, tip0[None, :])[0]
        tip_want = snapped.origin + s_t * e
        tipd = max(tipd, float(np.max(np.abs(tip_img - tip_want))))
        collar = max(collar, float(np.max(np.abs(
            motion.phi(t, edges) - edges))))
    ok = max(init_defect, inv, on_path, tipd, collar) <= tol
    return MotionReport(ok=ok, initial_defect=init_defect,
                        inverse_defect=inv, on_path_defect=on_path,
                        tip_defect=tipd, collar_defect=collar)


@dataclass
class SpeedReport:
    """Outcome of the crack-speed admissibility check."""

    max_speed_sq: float
    threshold: float
    margin: float
    passed: bool


def check_speed_condition(motion, alpha0, korn_const, T, sample_points,
                          n_times=33):
    """Check the admissibility condition max |phi_dot|^2 < alpha0 / K.

    The left side is sampled over sample_points and a uniform time
    grid; margin is (max speed squared) - threshold, negative when the
    condition holds.
    """
    if alpha0 <= 0 or korn_const <= 0:
        raise ValueError("speed condition needs alpha0 > 0 and K > 0")
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    vmax_sq = 0.0
    for t in np.linspace(0.0, T, n_times):
        vel = motion.phi_dot(t, pts)
        vmax_sq = max(vmax_sq, float((vel * vel).sum(axis=-1).max()))
    threshold = alpha0 / korn_const
    return SpeedReport(max_speed_sq=vmax_sq, threshold=threshold,
                       margin=vmax_sq - threshold,
                       passed=vmax_sq < threshold)


# ---------- Korn constant ----------

@dataclass
class KornEstimate:
    """Best discrete constant in |Du|^2 <= K (|u|^2 + |Eu|^2)."""

    value: float
    iterations: int
    converged: bool
    n_dofs: int


def estimate_korn_constant(space, rel_tol=1e-8, max_iter=10000, seed=7):
    """Largest generalized eigenvalue of the gradient Gram pencil.

    Solves G v = lambda (M + S) v by power iteration, where G, S, M are
    the full-gradient, symmetric-gradient and mass Gram matrices of the
    (possibly broken) space.  In 1D the symmetric gradient is the
    gradient and the best constant is 1 exactly; that degenerate case
    short-circuits.
    """
    if space.dim == 1:
        return KornEstimate(value=1.0, iterations=0, converged=True,
                            n_dofs=space.n_dofs)

    from . import assembly

    G = assembly.assemble_gradient_gram(space)
    S = assembly.assemble_strain_gram(space)
    M = assembly.assemble_mass(space)
    B = (M + S).tocsr()

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(space.n_dofs)
    x /= np.linalg.norm(x)
    lam_prev = 0.0
    y = None
    hits = 0
    for it in range(1, max_iter + 1):
        y = assembly.cg_solve(B, G @ x, x0=y, tol=1e-12, max_iter=50000)
        bx = B @ y
        lam = float((y @ (G @ y)) / (y @ bx))
        x = y / np.sqrt(y @ bx)
        y = x.copy()
        if abs(lam - lam_prev) <= rel_tol * max(abs(lam), 1e-300):
            hits += 1
            if hits >= 3:
                return KornEstimate(value=lam, iterations=it,
                                    converged=True, n_dofs=space.n_dofs)
        else:
            hits = 0
        lam_prev = lam
    return KornEstimate(value=lam_prev, iterations=max_iter,
                        converged=False, n_dofs=space.n_dofs)
