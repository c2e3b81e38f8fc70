"""Boundary-conforming triangular meshes for the CEM forward solver.

The generator morphs a structured disk mesh onto the star-shaped boundary:
concentric rings of nodes at radius fractions i/n share the boundary's
angular parameterization, the outermost ring resolves every electrode with
at least four edges, and consecutive rings are stitched by a circular
two-pointer merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MeshFailure


@dataclass
class Mesh:
    nodes: np.ndarray          # (n, 2) coordinates in meters
    triangles: np.ndarray      # (m, 3) node indices, CCW
    boundary_edges: np.ndarray  # (b, 2) node indices along the boundary
    edge_tags: np.ndarray      # (b,) electrode index or -1 for gaps
    element_size: float

    @property
    def num_elements(self):
        return len(self.triangles)

    def signed_areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def min_angle_deg(self):
        p = self.nodes[self.triangles]
        angs = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angs.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angs))


def _theta_of_arclength(boundary, s):
    """Invert the arc-length table, s in [0, P)."""
    s = np.mod(s, boundary.perimeter)
    return np.interp(s, boundary._arclen_table, boundary._theta_table)


def electrode_spans(boundary, layout):
    """Angular span [a_l, b_l] of each electrode (arc-centered on theta_l)."""
    spans = []
    for th in layout.angles:
        sc = float(boundary.arc_length(th))
        a = float(_theta_of_arclength(boundary, sc - 0.5 * layout.width))
        b = float(_theta_of_arclength(boundary, sc + 0.5 * layout.width))
        th_mod = np.mod(th, 2.0 * np.pi)
        # unwrap so a < th < b
        while a > th_mod:
            a -= 2.0 * np.pi
        while b < th_mod:
            b += 2.0 * np.pi
        spans.append((a, b))
    return spans


def _outer_ring_angles(boundary, layout, h):
    """Boundary node angles: electrode endpoints exact, >= 4 edges per electrode."""
    spans = electrode_spans(boundary, layout)
    order = np.argsort([0.5 * (a + b) % (2.0 * np.pi) for a, b in spans])
    angles = []
    tags_hint = []
    for idx in range(len(order)):
        ell = order[idx]
        a, b = spans[ell]
        a = a % (2.0 * np.pi)
        b = a + (spans[ell][1] - spans[ell][0])
        m_e = max(4, int(np.ceil(layout.width / h)))
        seg = np.linspace(a, b, m_e + 1)
        angles.extend(seg[:-1])
        tags_hint.extend([ell] * m_e)
        # gap up to the next electrode
        nxt = order[(idx + 1) % len(order)]
        a2 = spans[nxt][0] % (2.0 * np.pi)
        while a2 < b - 1e-12:
            a2 += 2.0 * np.pi
        gap_arc = float(boundary.arc_length(a2) - boundary.arc_length(b)) % boundary.perimeter
        m_g = max(1, int(round(gap_arc / h)))
        seg = np.linspace(b, a2, m_g + 1)
        angles.extend(seg[:-1])
        tags_hint.extend([-1] * m_g)
    angles = np.asarray(angles)
    tags_hint = np.asarray(tags_hint, dtype=int)
    # sort into [0, 2pi)
    angles = np.mod(angles, 2.0 * np.pi)
    perm = np.argsort(angles)
    return angles[perm], tags_hint[perm]


def _stitch(inner_idx, inner_ang, outer_idx, outer_ang):
    """Triangulate the annulus between two node rings (circular merge)."""
    ma, mb = len(inner_idx), len(outer_idx)
    # rotate both rings to start near angle of inner[0]
    start = np.argmin(np.mod(outer_ang - inner_ang[0], 2.0 * np.pi))
    outer_idx = np.roll(outer_idx, -start)
    outer_ang = np.roll(outer_ang, -start)
    ia = np.unwrap(np.concatenate([inner_ang, [inner_ang[0]]]))
    ib = np.unwrap(np.concatenate([outer_ang, [outer_ang[0]]]))
    # align the unwrapped origins
    if ib[0] - ia[0] > np.pi:
        ib -= 2.0 * np.pi
    elif ia[0] - ib[0] > np.pi:
        ib += 2.0 * np.pi
    tris = []
    a = b = 0
    while a < ma or b < mb:
        adv_a = a < ma and (b >= mb or ia[a + 1] <= ib[b + 1])
        if adv_a:
            tris.append(
                (inner_idx[a], outer_idx[b % mb], inner_idx[(a + 1) % ma])
            )
            a += 1
        else:
            tris.append(
                (inner_idx[a % ma], outer_idx[b], outer_idx[(b + 1) % mb])
            )
            b += 1
    return tris


def generate_mesh(boundary, layout, h, edge_refine_levels=0):
    """Conforming triangulation of the boundary interior.

    ``edge_refine_levels`` applies red-green refinement passes around the
    electrode edge points, where the CEM solution has weak singularities
    that dominate the convergence of the discrete ND map.  The unrefined
    mesh is quasi-uniform with min angle well above 15 degrees; refined
    meshes trade some local quality for accuracy near those points.

    Raises
    ------
    MeshFailure
        On non-positive h, non-physical layouts, or degenerate output.
    """
    if h <= 0.0:
        raise MeshFailure("element size h must be positive")
    if not layout.physical:
        raise MeshFailure("mesh generation requires a physical (non-overlapping) layout")

    r_mean = float(np.mean(boundary.radius(np.linspace(0, 2 * np.pi, 256, endpoint=False))))
    n_rings = max(3, int(round(r_mean / h)))

    outer_ang, _ = _outer_ring_angles(boundary, layout, h)

    nodes = [(0.0, 0.0)]
    ring_indices = []
    ring_angles = []
    for i in range(1, n_rings + 1):
        rho = i / n_rings
        if i >= n_rings - 1:
            ang = outer_ang
        else:
            m_i = max(8, int(np.ceil(2.0 * np.pi * rho * r_mean / h)))
            m_i = min(m_i, len(outer_ang))
            ang = 2.0 * np.pi * np.arange(m_i) / m_i
        rr = rho * boundary.radius(ang)
        idx = np.arange(len(nodes), len(nodes) + len(ang))
        nodes.extend(zip(rr * np.cos(ang), rr * np.sin(ang)))
        ring_indices.append(idx)
        ring_angles.append(ang)

    tris = []
    first = ring_indices[0]
    for j in range(len(first)):
        tris.append((0, first[j], first[(j + 1) % len(first)]))
    for i in range(len(ring_indices) - 1):
        tris.extend(
            _stitch(ring_indices[i], ring_angles[i], ring_indices[i + 1], ring_angles[i + 1])
        )

    nodes = np.asarray(nodes, dtype=float)
    tris = np.asarray(tris, dtype=int)

    # enforce CCW orientation
    p = nodes[tris]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    flip = area2 < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(np.abs(area2) < 1e-300):
        raise MeshFailure("degenerate (zero-area) triangle produced")

    # boundary edges with electrode tags
    spans = electrode_spans(boundary, layout)
    out_idx = ring_indices[-1]
    out_ang = ring_angles[-1]
    nb = len(out_idx)
    edges = np.stack([out_idx, np.roll(out_idx, -1)], axis=1)
    mids = out_ang + 0.5 * np.mod(np.roll(out_ang, -1) - out_ang, 2.0 * np.pi)
    tags = np.full(nb, -1, dtype=int)
    for ell, (a, b) in enumerate(spans):
        width_ang = b - a
        rel = np.mod(mids - a, 2.0 * np.pi)
        tags[rel < width_ang - 1e-12] = ell

    for ell in range(layout.count):
        if np.count_nonzero(tags == ell) < 4:
            raise MeshFailure(f"electrode {ell} resolved by fewer than 4 edges")

    mesh = Mesh(
        nodes=nodes,
        triangles=tris,
        boundary_edges=edges,
        edge_tags=tags,
        element_size=float(h),
    )
    if edge_refine_levels > 0:
        sing = np.concatenate(
            [boundary.point(np.array([a, b])) for a, b in spans]
        )
        node_angle = np.full(len(nodes), np.nan)
        node_angle[out_idx] = out_ang
        for level in range(edge_refine_levels):
            radius = 1.6 * h * 0.5**level
            mesh, node_angle = _refine_near(mesh, node_angle, boundary, sing, radius)
    return mesh


def _refine_near(mesh, node_angle, boundary, points, radius):
    """One red-green pass: red-split triangles near ``points``, green closure.

    Midpoints of boundary edges are placed on the boundary curve (angular
    midpoint), so electrode endpoints and tags stay exact.
    """
    nodes = list(map(tuple, mesh.nodes))
    node_angle = list(node_angle)
    tris = mesh.triangles
    pz = mesh.nodes[:, 0] + 1j * mesh.nodes[:, 1]
    near = np.zeros(len(nodes), dtype=bool)
    for p in points:
        near |= np.abs(pz - p) <= radius
    red = near[tris].any(axis=1)

    bedge = {}
    for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags):
        bedge[(min(a, b), max(a, b))] = t

    split = {}

    def edge_key(a, b):
        return (min(a, b), max(a, b))

    # closure: triangles with >= 2 split edges become red
    marked = set(np.nonzero(red)[0])
    while True:
        split_edges = set()
        for t in marked:
            a, b, c = tris[t]
            split_edges.update({edge_key(a, b), edge_key(b, c), edge_key(c, a)})
        grew = False
        for t in range(len(tris)):
            if t in marked:
                continue
            a, b, c = tris[t]
            k = sum(e in split_edges for e in (edge_key(a, b), edge_key(b, c), edge_key(c, a)))
            if k >= 2:
                marked.add(t)
                grew = True
        if not grew:
            break

    def midpoint(a, b):
        key = edge_key(a, b)
        if key in split:
            return split[key]
        if key in bedge and not np.isnan(node_angle[a]) and not np.isnan(node_angle[b]):
            ta, tb = node_angle[a], node_angle[b]
            d = (tb - ta) % (2.0 * np.pi)
            if d > np.pi:
                ta, tb = tb, ta
                d = (tb - ta) % (2.0 * np.pi)
            tm = (ta + 0.5 * d) % (2.0 * np.pi)
            z = complex(boundary.point(tm))
            nodes.append((z.real, z.imag))
            node_angle.append(tm)
        else:
            x = 0.5 * (np.asarray(nodes[a]) + np.asarray(nodes[b]))
            nodes.append(tuple(x))
            node_angle.append(np.nan)
        split[key] = len(nodes) - 1
        return split[key]

    new_tris = []
    for t in range(len(tris)):
        a, b, c = tris[t]
        if t in marked:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        else:
            es = [edge_key(a, b), edge_key(b, c), edge_key(c, a)]
            present = [e for e in es if e in split]
            if not present:
                new_tris.append((a, b, c))
            else:
                # exactly one split edge: green bisection
                e = present[0]
                m = split[e]
                opp = ({a, b, c} - set(e)).pop()
                u, v = e
                new_tris += [(opp, u, m), (opp, m, v)]

    new_bedges = []
    new_btags = []
    for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags):
        key = edge_key(a, b)
        if key in split:
            m = split[key]
            new_bedges += [(a, m), (m, b)]
            new_btags += [t, t]
        else:
            new_bedges.append((a, b))
            new_btags.append(t)

    nodes = np.asarray(nodes)
    new_tris = np.asarray(new_tris, dtype=int)
    p = nodes[new_tris]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    flip = area2 < 0.0
    new_tris[flip] = new_tris[flip][:, [0, 2, 1]]

    out = Mesh(
        nodes=nodes,
        triangles=new_tris,
        boundary_edges=np.asarray(new_bedges, dtype=int),
        edge_tags=np.asarray(new_btags, dtype=int),
        element_size=mesh.element_size,
    )
    return out, np.asarray(node_angle)


def save_mesh(mesh, path):
    """Write mesh in the plain-text node/element format (see load_mesh)."""
    with open(path, "w") as f:
        f.write("dbareit-mesh 1\n")
        f.write(f"h {mesh.element_size!r}\n")
        f.write(f"nodes {len(mesh.nodes)}\n")
        for x, y in mesh.nodes:
            f.write(f"{x!r} {y!r}\n")
        f.write(f"triangles {len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        f.write(f"boundary_edges {len(mesh.boundary_edges)}\n")
        for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags):
            f.write(f"{a} {b} {t}\n")


def load_mesh(path):
    """Read the plain-text mesh format written by save_mesh.

    Format: a ``dbareit-mesh 1`` header, an ``h <size>`` line, then blocks
    ``nodes N`` (x y per line), ``triangles M`` (i j k), and
    ``boundary_edges B`` (i j tag).
    """
    with open(path) as f:
        header = f.readline().split()
        if header[:1] != ["dbareit-mesh"]:
            raise MeshFailure(f"not a dbareit mesh file: {path}")
        h = float(f.readline().split()[1])
        n = int(f.readline().split()[1])
        nodes = np.array([[float(v) for v in f.readline().split()] for _ in range(n)])
        m = int(f.readline().split()[1])
        tris = np.array(
            [[int(v) for v in f.readline().split()] for _ in range(m)], dtype=int
        )
        b = int(f.readline().split()[1])
        rows = [[int(v) for v in f.readline().split()] for _ in range(b)]
    rows = np.asarray(rows, dtype=int)
    return Mesh(
        nodes=nodes,
        triangles=tris,
        boundary_edges=rows[:, :2],
        edge_tags=rows[:, 2],
        element_size=h,
    )
