"""Simplicial meshes of intervals and rectangles with their discrete operators."""
import logging
from collections import Counter
import numpy as np
import scipy.sparse as sp
from minwave.const import DEGENERATE_CELL
from minwave.exceptions import ValidationError
from minwave.moduli import mandel_pairs

LOGGER = logging.getLogger(__name__)

LEFT = 'left'
RIGHT = 'right'
BOTTOM = 'bottom'
TOP = 'top'
SIDES = (LEFT, RIGHT, BOTTOM, TOP)


def _inside(point, box):
    """True when point lies in an axis-aligned box [[lo, hi], ...]."""
    return all(low - 1e-12 <= x <= high + 1e-12
               for x, (low, high) in zip(point, box))


def tag_regions(centroids, regions):
    """Region index per cell from (name, box) pairs; later boxes win."""
    tags = np.full(len(centroids), -1, dtype=int)
    for index, (_, box) in enumerate(regions):
        if box is None:
            tags[tags < 0] = index
    for index, (_, box) in enumerate(regions):
        if box is None:
            continue
        for cell, centroid in enumerate(centroids):
            if _inside(centroid, box):
                tags[cell] = index
    missing = np.flatnonzero(tags < 0)
    if missing.size:
        raise ValidationError("{} cells are not covered by any region".format(
            missing.size))
    return tags


class Mesh(object):
    """Conforming simplicial mesh in one or two dimensions."""

    def __init__(self, nodes, cells, tags=None, region_names=None):
        """Build geometry, boundary and shape-function gradients."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        cells = np.array(cells, dtype=int)
        self.dim = nodes.shape[1]
        if self.dim not in (1, 2):
            raise ValidationError("only 1D and 2D meshes are supported")
        if cells.ndim != 2 or cells.shape[1] != self.dim + 1:
            raise ValidationError("cells must have {} nodes each".format(
                self.dim + 1))
        if cells.min() < 0 or cells.max() >= len(nodes):
            raise ValidationError("cell connectivity refers to missing nodes")
        self.nodes = nodes
        self.cells = cells
        self.tags = (np.zeros(len(cells), dtype=int) if tags is None
                     else np.asarray(tags, dtype=int))
        self.region_names = list(region_names or ['default'])
        if self.tags.max() >= len(self.region_names):
            raise ValidationError("cell region tag without a region")
        self._geometry()
        self._boundary()
        LOGGER.debug("Built %dD mesh with %d nodes, %d cells, %d boundary "
                     "nodes", self.dim, self.n_nodes, self.n_cells,
                     len(self.boundary_nodes))

    @classmethod
    def interval(cls, start, stop, cells, regions=None):
        """Uniform mesh of [start, stop]."""
        if cells < 1 or not stop > start:
            raise ValidationError("interval needs stop > start and cells >= 1")
        nodes = np.linspace(start, stop, cells + 1)
        connectivity = np.column_stack([np.arange(cells),
                                        np.arange(1, cells + 1)])
        return cls._tagged(nodes[:, None], connectivity, regions)

    @classmethod
    def rectangle(cls, width, height, nx, ny, regions=None):
        """Structured triangulation of [0, width] x [0, height]."""
        if nx < 1 or ny < 1 or width <= 0 or height <= 0:
            raise ValidationError("rectangle needs positive sizes and counts")
        xs, ys = np.linspace(0, width, nx + 1), np.linspace(0, height, ny + 1)
        grid_x, grid_y = np.meshgrid(xs, ys)
        nodes = np.column_stack([grid_x.ravel(), grid_y.ravel()])
        triangles = []
        for j in range(ny):
            for i in range(nx):
                corner = j * (nx + 1) + i
                right, up = corner + 1, corner + nx + 1
                triangles.append([corner, right, up + 1])
                triangles.append([corner, up + 1, up])
        return cls._tagged(nodes, np.array(triangles), regions)

    @classmethod
    def _tagged(cls, nodes, cells, regions):
        """Attach region tags from (name, box) pairs."""
        if not regions:
            return cls(nodes, cells)
        centroids = nodes[cells].mean(axis=1)
        tags = tag_regions(centroids, regions)
        return cls(nodes, cells, tags, [name for name, _ in regions])

    def _geometry(self):
        """Cell volumes, gradients of the P1 basis and lumped weights."""
        coords = self.nodes[self.cells]
        edges = coords[:, 1:, :] - coords[:, :1, :]
        if self.dim == 1:
            volumes = edges[:, 0, 0]
        else:
            volumes = 0.5 * (edges[:, 0, 0] * edges[:, 1, 1] -
                             edges[:, 0, 1] * edges[:, 1, 0])
        scale = np.abs(volumes).mean()
        if np.any(np.abs(volumes) <= DEGENERATE_CELL * scale):
            raise ValidationError("mesh has degenerate cells")
        flipped = volumes < 0
        if np.any(flipped):
            swap = self.cells[flipped]
            self.cells[flipped] = swap[:, ::-1]
            coords = self.nodes[self.cells]
            edges = coords[:, 1:, :] - coords[:, :1, :]
        self.volumes = np.abs(volumes)
        inverse = np.linalg.inv(edges)
        grads = np.zeros((self.n_cells, self.dim + 1, self.dim))
        grads[:, 1:, :] = np.transpose(inverse, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.shape_gradients = grads
        weights = np.zeros(self.n_nodes)
        np.add.at(weights, self.cells,
                  np.repeat(self.volumes[:, None] / (self.dim + 1),
                            self.dim + 1, axis=1))
        self.node_weights = weights

    def _boundary(self):
        """Boundary nodes, their side tags and surface weights."""
        weights = Counter()
        if self.dim == 1:
            counts = Counter(self.cells.ravel().tolist())
            for node, count in counts.items():
                if count == 1:
                    weights[node] = 1.0
        else:
            edges = Counter()
            for cell in self.cells:
                for a, b in ((0, 1), (1, 2), (2, 0)):
                    edges[tuple(sorted((cell[a], cell[b])))] += 1
            for (a, b), count in edges.items():
                if count == 1:
                    length = np.linalg.norm(self.nodes[a] - self.nodes[b])
                    weights[a] += 0.5 * length
                    weights[b] += 0.5 * length
        self.boundary_nodes = np.array(sorted(weights), dtype=int)
        self.boundary_weights = np.array(
            [weights[n] for n in self.boundary_nodes])
        self.boundary_sides = [self._side(n) for n in self.boundary_nodes]

    def _side(self, node):
        """Side tag of a boundary node; corners go to left/right."""
        low, high = self.nodes.min(axis=0), self.nodes.max(axis=0)
        point = self.nodes[node]
        tol = 1e-10 * max(np.abs(high - low).max(), 1.0)
        if abs(point[0] - low[0]) <= tol:
            return LEFT
        if abs(point[0] - high[0]) <= tol:
            return RIGHT
        if self.dim == 2 and abs(point[1] - low[1]) <= tol:
            return BOTTOM
        if self.dim == 2 and abs(point[1] - high[1]) <= tol:
            return TOP
        return 'boundary'

    @property
    def n_nodes(self):
        """Number of nodes."""
        return len(self.nodes)

    @property
    def n_cells(self):
        """Number of cells."""
        return len(self.cells)

    @property
    def n_boundary(self):
        """Number of boundary nodes."""
        return len(self.boundary_nodes)

    @property
    def centroids(self):
        """Cell centroids."""
        return self.nodes[self.cells].mean(axis=1)

    def side_mask(self, side):
        """Boolean mask over boundary nodes on a given side."""
        return np.array([s == side for s in self.boundary_sides])

    def gradient(self):
        """Scalar nodal field to cellwise gradient, cell-major rows."""
        rows, cols, vals = [], [], []
        for local in range(self.dim + 1):
            for j in range(self.dim):
                rows.append(np.arange(self.n_cells) * self.dim + j)
                cols.append(self.cells[:, local])
                vals.append(self.shape_gradients[:, local, j])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows),
                                    np.concatenate(cols))),
            shape=(self.n_cells * self.dim, self.n_nodes))

    def strain(self):
        """Nodal vector field to cellwise strain in compressed storage."""
        pairs, weights = mandel_pairs(self.dim)
        size = len(pairs)
        rows, cols, vals = [], [], []
        cell_ids = np.arange(self.n_cells)
        for m, ((i, j), w) in enumerate(zip(pairs, weights)):
            for local in range(self.dim + 1):
                node = self.cells[:, local]
                grad = self.shape_gradients[:, local, :]
                if i == j:
                    terms = [(i, grad[:, i])]
                else:
                    terms = [(i, 0.5 * w * grad[:, j]),
                             (j, 0.5 * w * grad[:, i])]
                for comp, value in terms:
                    rows.append(cell_ids * size + m)
                    cols.append(node * self.dim + comp)
                    vals.append(value)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows),
                                    np.concatenate(cols))),
            shape=(self.n_cells * size, self.n_nodes * self.dim))

    def nodal_weights(self, components=1):
        """Lumped nodal weights repeated per component."""
        return np.repeat(self.node_weights, components)

    def cell_weights(self, components=1):
        """Cell volumes repeated per component."""
        return np.repeat(self.volumes, components)

    def trace_index(self, components=1):
        """Positions of boundary components inside a nodal vector."""
        return (self.boundary_nodes[:, None] * components +
                np.arange(components)[None, :]).ravel()

    def trace_weights(self, components=1):
        """Surface weights repeated per component."""
        return np.repeat(self.boundary_weights, components)

    def trace_operator(self, components=1):
        """Sparse map from boundary traces to nodal vectors, weighted by S."""
        index = self.trace_index(components)
        return sp.csr_matrix(
            (self.trace_weights(components), (index, np.arange(index.size))),
            shape=(self.n_nodes * components, index.size))

    def cell_region_names(self):
        """Region name per cell."""
        return [self.region_names[t] for t in self.tags]

    def node_regions(self):
        """Per node: list of (region index, adjacent volume share)."""
        shares = [Counter() for _ in range(self.n_nodes)]
        share = self.volumes / (self.dim + 1)
        for index, (cell, tag) in enumerate(zip(self.cells, self.tags)):
            for node in cell:
                shares[node][int(tag)] += share[index]
        return shares
