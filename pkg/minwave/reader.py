"""Module used to read comma-separated node, cell and field tables."""
import os
import csv
import logging
import numpy as np
from minwave.exceptions import ValidationError
from minwave.fields import ComplexFields, NODE
from minwave.hs import Polarization
from minwave.mesh import Mesh

LOGGER = logging.getLogger(__name__)

ATTR_NODE = 'node'
ATTR_CELL = 'cell'
ATTR_REGION = 'region'
ATTR_PART = 'part'
ATTR_INDEX = 'index'
ATTR_REAL = 'real'
ATTR_IMAG = 'imag'
COORDINATES = ('x', 'y')
FIELD_PARTS = ('nodal', 'cell', 'trace')


class TableReader(object):
    """Class to parse a table with a header line."""

    def __init__(self, csvfile, required=()):
        """Initialize class."""
        self._csvfile = csvfile
        self._data = None
        self._headers = {}
        if not os.path.isfile(self._csvfile):
            raise FileNotFoundError("Invalid file {}".format(self._csvfile))
        self.read_csv()
        self.get_headers()
        missing = [name for name in required if name not in self._headers]
        if missing:
            raise ValidationError("{} lacks columns: {}".format(
                self._csvfile, ', '.join(missing)))

    @property
    def headers(self):
        """Returns header index dict."""
        return self._headers

    @property
    def data(self):
        """Returns data read in from csv file."""
        return self._data

    def read_csv(self):
        """Reads the csv file, skipping blank lines."""
        data = list()
        with open(self._csvfile, newline='') as table:
            for row in csv.reader(table, delimiter=',', quotechar='"'):
                if row:
                    data.append(row)
        if not data:
            raise ValidationError("{} is empty".format(self._csvfile))
        self._data = data

    def get_headers(self):
        """Retrieve header indices from the first line."""
        header_line = self._data[0]
        for index, item in enumerate(header_line):
            key = item.strip().lower().replace(' ', '_')
            self._headers[key] = index
        LOGGER.debug("Headers: %s", self._headers)
        # Get rid of header line from data
        self._data.pop(0)

    def column(self, name, convert=float):
        """Converted values of one column."""
        index = self._headers[name]
        try:
            return [convert(row[index]) for row in self._data]
        except (ValueError, IndexError) as err:
            raise ValidationError("bad value in column '{}' of {}: {}".format(
                name, self._csvfile, err))


def _ordered(reader, name):
    """Column sorted by the integer id column ``name``."""
    ids = np.array(reader.column(name, int))
    if sorted(ids.tolist()) != list(range(len(ids))):
        raise ValidationError("{} ids must run from 0 to {}".format(
            name, len(ids) - 1))
    return np.argsort(ids)


def read_nodes(csvfile):
    """Node coordinates from a (node, x[, y]) table."""
    reader = TableReader(csvfile, required=(ATTR_NODE, COORDINATES[0]))
    order = _ordered(reader, ATTR_NODE)
    axes = [axis for axis in COORDINATES if axis in reader.headers]
    nodes = np.column_stack([reader.column(axis) for axis in axes])
    return nodes[order]


def read_cells(csvfile):
    """Connectivity and per-cell region names from a cell table.

    Columns are cell, n0, n1[, n2] and an optional region.
    """
    reader = TableReader(csvfile, required=(ATTR_CELL, 'n0', 'n1'))
    order = _ordered(reader, ATTR_CELL)
    corners = [name for name in ('n0', 'n1', 'n2') if name in reader.headers]
    cells = np.column_stack([reader.column(name, int) for name in corners])
    if ATTR_REGION in reader.headers:
        regions = reader.column(ATTR_REGION, str)
    else:
        regions = ['default'] * len(cells)
    return cells[order], [regions[i] for i in order]


def read_mesh(node_file, cell_file):
    """Mesh built from node and cell tables."""
    nodes = read_nodes(node_file)
    cells, regions = read_cells(cell_file)
    names = list(dict.fromkeys(regions))
    tags = [names.index(region) for region in regions]
    LOGGER.info("Read mesh with %d nodes and %d cells", len(nodes),
                len(cells))
    return Mesh(nodes, cells, tags, names)


def _read_parts(csvfile, sizes, kind):
    """Complex entries per part from a (part, index, real, imag) table."""
    reader = TableReader(csvfile, required=(ATTR_PART, ATTR_INDEX, ATTR_REAL,
                                            ATTR_IMAG))
    values = {part: np.full(size, np.nan, dtype=complex)
              for part, size in sizes.items()}
    parts = reader.column(ATTR_PART, str)
    indices = reader.column(ATTR_INDEX, int)
    real, imag = reader.column(ATTR_REAL), reader.column(ATTR_IMAG)
    for part, index, re_value, im_value in zip(parts, indices, real, imag):
        if part not in values or not 0 <= index < sizes[part]:
            raise ValidationError("{} table entry ({}, {}) does not fit "
                                  "the mesh".format(kind, part, index))
        values[part][index] = complex(re_value, im_value)
    for part, entries in values.items():
        if np.isnan(entries.real).any():
            raise ValidationError("{} table misses {} entries of '{}'".format(
                kind, int(np.isnan(entries.real).sum()), part))
    return values


def read_fields(csvfile, layout):
    """Complex fields from a (part, index, real, imag) table."""
    sizes = dict(zip(FIELD_PARTS, (layout.n_nodal, layout.n_cell,
                                   layout.n_trace)))
    values = _read_parts(csvfile, sizes, 'field')
    return ComplexFields(layout, values['nodal'], values['cell'],
                         values['trace'])


def polarization_parts(layout):
    """Table part name of block 1 and block 2 of a quadruple."""
    return tuple('nodal' if layout.block_kind(block) == NODE else 'cell'
                 for block in (1, 2))


def read_polarization(csvfile, layout):
    """Polarization from a (part, index, real, imag) table.

    Each row holds one entry of a block: the first half of the block in
    ``real`` and the second half in ``imag``.
    """
    counts, sizes = layout.block_counts, layout.block_sizes
    parts = polarization_parts(layout)
    values = _read_parts(csvfile, {
        part: count * size
        for part, count, size in zip(parts, counts, sizes)}, 'polarization')
    blocks = []
    for part, count, size in zip(parts, counts, sizes):
        entries = values[part].reshape(count, size)
        blocks.append(np.hstack([entries.real, entries.imag]).ravel())
    return Polarization(layout, np.concatenate(blocks))
