"""Module used to write result tables and summary records."""
import os
import csv
import json
import pathlib
import logging
from minwave.reader import (ATTR_NODE, ATTR_CELL, ATTR_REGION, ATTR_PART,
                            ATTR_INDEX, ATTR_REAL, ATTR_IMAG, COORDINATES,
                            polarization_parts)

LOGGER = logging.getLogger(__name__)

HISTORY_HEADER = ('iteration', 'residual', 'value')
GREENS_HEADER = ('x', 'y', 'z', 'row', 'col', 'value')


def output_path(directory, run_id, command, name):
    """File name keyed by run id and subcommand; creates the directory."""
    pathlib.Path(directory).mkdir(parents=True, exist_ok=True)
    return os.path.join(directory, '{}_{}_{}'.format(
        run_id, command.replace('-', '_'), name))


def write_table(csvfile, header, rows):
    """Writes a header line and rows."""
    with open(csvfile, 'w', newline='') as table:
        writer = csv.writer(table, delimiter=',', quotechar='"')
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    LOGGER.debug("Wrote %d rows to %s", count, csvfile)
    return csvfile


def _float(value):
    """Plain float, written with repr precision by csv."""
    return float(value)


def write_fields(csvfile, fields):
    """Complex nodal, cell and trace values, one entry per row."""
    rows = []
    for part, values in (('nodal', fields.nodal), ('cell', fields.cell),
                         ('trace', fields.trace)):
        for index, value in enumerate(values):
            rows.append((part, index, _float(value.real), _float(value.imag)))
    return write_table(csvfile, (ATTR_PART, ATTR_INDEX, ATTR_REAL, ATTR_IMAG),
                       rows)


def write_polarization(csvfile, polarization):
    """Polarization as a (part, index, real, imag) table, block by block."""
    layout = polarization.layout
    first_x, first_y, second_x, second_y = polarization.blocks
    rows = []
    for part, (real, imag) in zip(polarization_parts(layout),
                                  ((first_x, first_y), (second_x, second_y))):
        for index, (re_value, im_value) in enumerate(zip(real.ravel(),
                                                         imag.ravel())):
            rows.append((part, index, _float(re_value), _float(im_value)))
    return write_table(csvfile, (ATTR_PART, ATTR_INDEX, ATTR_REAL, ATTR_IMAG),
                       rows)


def write_mesh(node_file, cell_file, mesh):
    """Node and cell tables that read_mesh accepts."""
    axes = COORDINATES[:mesh.dim]
    write_table(node_file, (ATTR_NODE,) + axes,
                [(i,) + tuple(_float(c) for c in point)
                 for i, point in enumerate(mesh.nodes)])
    corners = tuple('n{}'.format(i) for i in range(mesh.dim + 1))
    write_table(cell_file, (ATTR_CELL,) + corners + (ATTR_REGION,),
                [(i,) + tuple(int(n) for n in cell) + (region,)
                 for i, (cell, region) in enumerate(
                     zip(mesh.cells, mesh.cell_region_names()))])
    return node_file, cell_file


def write_history(csvfile, report):
    """Convergence history of a CG run."""
    return write_table(csvfile, HISTORY_HEADER,
                       [(i, _float(r), _float(v)) for i, r, v in
                        report.rows()])


def write_greens(csvfile, rows):
    """Green's function table rows."""
    return write_table(csvfile, GREENS_HEADER,
                       [(_float(x), _float(y), _float(z), int(r), int(c),
                         _float(v)) for x, y, z, r, c, v in rows])


def write_summary(jsonfile, record):
    """Summary record as indented json."""
    with open(jsonfile, 'w') as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
    LOGGER.info("Summary written to %s", jsonfile)
    return jsonfile
