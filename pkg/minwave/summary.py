"""Module used to assemble the summary record of a run."""

import logging
import numpy as np
from minwave.const import (__version__, CONF_RUN_ID, CONF_UNITS,
                           CONF_PHYSICS, CONF_FREQUENCY)
from minwave.moduli import check_passivity

LOGGER = logging.getLogger(__name__)


def plain(value):
    """Json-friendly copy; complex numbers become [re, im] pairs."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


class SummaryRecord(object):
    """Representation of the summary record of one run."""

    def __init__(self, config, command):
        """Initialize the record with the run description."""
        self.run_id = config[CONF_RUN_ID]
        self.body = {
            'command': command,
            'version': __version__,
            CONF_UNITS: config[CONF_UNITS],
            CONF_PHYSICS: config.get(CONF_PHYSICS),
            CONF_FREQUENCY: config.get(CONF_FREQUENCY),
            'artifacts': [],
        }

    def add(self, section, values):
        """Adds a section of values."""
        LOGGER.debug("Adding summary section %s", section)
        self.body[section] = plain(values)

    def add_artifact(self, path):
        """Records a written file."""
        self.body['artifacts'].append(str(path))

    @property
    def record(self):
        """Record keyed by run id."""
        return {self.run_id: self.body}


def solver_entry(report):
    """Reproducible part of a solve report; timings are left out."""
    entry = report.as_dict()
    entry.pop('wall_time', None)
    return entry


def passivity_entry(medium):
    """Per-region passivity classification of both tensors."""
    entry = {}
    for moduli in medium.moduli:
        report = check_passivity(moduli)
        entry[moduli.region] = {
            tensor.name: {'status': tensor.status,
                          'min_eigenvalue': tensor.min_eigenvalue}
            for tensor in report.tensors}
    return entry


def dissipation_entry(dissipation, power):
    """Dissipated power against the boundary working rate."""
    scale = max(abs(dissipation.mean_power), abs(power), 1e-300)
    return {'stiffness_part': dissipation.stiffness_part,
            'inertial_part': dissipation.inertial_part,
            'mean_power': dissipation.mean_power,
            'boundary_power': power,
            'balance_error': abs(dissipation.mean_power - power) / scale}
