"""Used to load and validate the yaml run configuration."""

import os
import logging
import yaml
import voluptuous as vol
from minwave.util import (string, boolean, ensure_list, positive,
                          complex_array, real_array, even_order)
from minwave.exceptions import ValidationError
from minwave.mesh import SIDES
from minwave.const import (CONF_RUN_ID, CONF_UNITS, CONF_PHYSICS,
                           CONF_FREQUENCY, CONF_CONVENTION, CONF_GEOMETRY,
                           CONF_INTERVAL, CONF_RECTANGLE, CONF_CELLS,
                           CONF_NODES, CONF_ELEMENTS, CONF_REGIONS,
                           CONF_NAME, CONF_BOX, CONF_STIFFNESS, CONF_DENSITY,
                           CONF_BULK, CONF_PERMITTIVITY, CONF_PERMEABILITY,
                           CONF_BOUNDARY, CONF_TYPE, CONF_VALUE, CONF_PRIMAL,
                           CONF_TRACE, CONF_SOURCE, CONF_BODY_FORCE,
                           CONF_SOLVER, CONF_MAX_ITER, CONF_TOLERANCE,
                           CONF_PRECONDITIONER, CONF_SEED, CONF_ROTATION,
                           CONF_RANDOM_START, CONF_POLARIZATION,
                           CONF_TOMOGRAPHY, CONF_TRIAL, CONF_RANDOM_TRIALS,
                           CONF_HS, CONF_SCALE, CONF_REFERENCE, CONF_GREENS,
                           CONF_MEDIUM, CONF_POINTS, CONF_QUADRATURE,
                           CONF_D, CONF_Q, CONF_BLOCKS, CONF_LOGGER,
                           CONF_FILE, CONF_LEVEL, CONF_OUTPUT, CONF_DIR,
                           FILE_CONFIG, AUTO)
from minwave.const import (PHYSICS, CONVENTION_MINUS, CONVENTION_PLUS,
                           DIRICHLET, NEUMANN, CUSTOM, ESSENTIAL, NATURAL,
                           PRECOND_NONE, PRECOND_JACOBI, DEFAULT_POLAR_ORDER)

LOGGER = logging.getLogger(__name__)

COUNT = vol.All(vol.Coerce(int), vol.Range(min=0))
PAIR = vol.All([vol.Coerce(float)], vol.Length(min=2, max=2))
POINT = vol.All([vol.Coerce(float)], vol.Length(min=3, max=3))

SELECTION_SCHEMA = vol.Schema({
    vol.Required(CONF_TYPE): vol.In([ESSENTIAL, NATURAL]),
    vol.Optional(CONF_VALUE, default=0.0): real_array
})

SIDE_SCHEMA = vol.Schema({
    vol.Required(CONF_TYPE): vol.In([DIRICHLET, NEUMANN, CUSTOM]),
    vol.Optional(CONF_VALUE, default=0.0): complex_array,
    vol.Optional(CONF_PRIMAL): SELECTION_SCHEMA,
    vol.Optional(CONF_TRACE): SELECTION_SCHEMA
})

REGION_SCHEMA = vol.Schema({
    vol.Required(CONF_NAME): string,
    vol.Optional(CONF_BOX): vol.Any(None, vol.All([PAIR],
                                                  vol.Length(min=1, max=2))),
    vol.Optional(CONF_STIFFNESS): complex_array,
    vol.Optional(CONF_DENSITY): complex_array,
    vol.Optional(CONF_BULK): complex_array,
    vol.Optional(CONF_PERMITTIVITY): complex_array,
    vol.Optional(CONF_PERMEABILITY): complex_array
})

GEOMETRY_SCHEMA = vol.Schema({
    vol.Optional(CONF_INTERVAL): PAIR,
    vol.Optional(CONF_RECTANGLE): PAIR,
    vol.Optional(CONF_CELLS): vol.Any(
        vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.All([vol.All(vol.Coerce(int), vol.Range(min=1))],
                vol.Length(min=2, max=2))),
    vol.Optional(CONF_NODES): string,
    vol.Optional(CONF_ELEMENTS): string
})

MEDIUM_SCHEMA = vol.Any(
    vol.Schema({
        vol.Required(CONF_D): positive,
        vol.Required(CONF_Q): positive
    }),
    vol.Schema({vol.Required(key): real_array for key in CONF_BLOCKS})
)

SCHEMA = vol.Schema({
    vol.Optional(CONF_RUN_ID, default='run'): string,
    vol.Optional(CONF_UNITS, default='SI'): string,
    vol.Optional(CONF_PHYSICS): vol.In(PHYSICS),
    vol.Optional(CONF_FREQUENCY): positive,
    vol.Optional(CONF_CONVENTION, default=CONVENTION_MINUS):
        vol.In([CONVENTION_MINUS, CONVENTION_PLUS]),
    vol.Optional(CONF_GEOMETRY): GEOMETRY_SCHEMA,
    vol.Optional(CONF_REGIONS, default=[]): [REGION_SCHEMA],
    vol.Optional(CONF_BOUNDARY, default={}): vol.Schema({
        vol.In(SIDES): SIDE_SCHEMA
    }),
    vol.Optional(CONF_SOURCE, default={}): vol.Schema({
        vol.Optional(CONF_BODY_FORCE, default=0.0): complex_array,
        vol.Optional(CONF_REGIONS, default=[]): ensure_list
    }),
    vol.Optional(CONF_SOLVER, default={}): vol.Schema({
        vol.Optional(CONF_MAX_ITER, default=1000):
            vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_TOLERANCE, default=1e-10): positive,
        vol.Optional(CONF_PRECONDITIONER, default=PRECOND_JACOBI):
            vol.In([PRECOND_NONE, PRECOND_JACOBI]),
        vol.Optional(CONF_SEED, default=None): vol.Any(None, vol.Coerce(int)),
        vol.Optional(CONF_ROTATION, default=None):
            vol.Any(None, AUTO, vol.Coerce(float)),
        vol.Optional(CONF_RANDOM_START, default=False): boolean
    }),
    vol.Optional(CONF_TOMOGRAPHY, default={}): vol.Schema({
        vol.Optional(CONF_TRIAL): string,
        vol.Optional(CONF_RANDOM_TRIALS, default=20): COUNT
    }),
    vol.Optional(CONF_HS, default={}): vol.Schema({
        vol.Optional(CONF_SCALE, default=2.0): positive,
        vol.Optional(CONF_REFERENCE): string,
        vol.Optional(CONF_POLARIZATION): string,
        vol.Optional(CONF_RANDOM_TRIALS, default=20): COUNT
    }),
    vol.Optional(CONF_GREENS): vol.Schema({
        vol.Required(CONF_MEDIUM): MEDIUM_SCHEMA,
        vol.Required(CONF_POINTS): vol.All([POINT], vol.Length(min=1)),
        vol.Optional(CONF_QUADRATURE, default=DEFAULT_POLAR_ORDER): even_order
    }),
    vol.Optional(CONF_LOGGER, default={CONF_FILE: '', CONF_LEVEL: 'info'}):
        vol.Schema({
            vol.Optional(CONF_FILE, default=''): string,
            vol.Optional(CONF_LEVEL, default='info'): string
        }),
    vol.Optional(CONF_OUTPUT, default={}): vol.Schema({
        vol.Optional(CONF_DIR, default='.'): string
    })
})


def _key_path(error):
    """Dotted key path of a voluptuous error."""
    return '.'.join(str(part) for part in error.path) or '<root>'


def validate(cfg):
    """Validate a configuration mapping and fill in defaults."""
    if cfg is None:
        cfg = {}
    try:
        config = SCHEMA(cfg)
    except vol.MultipleInvalid as err:
        problems = ['{}: {}'.format(_key_path(e), e.msg) for e in err.errors]
        raise ValidationError("Invalid configuration. {}".format(
            '; '.join(problems)))
    except vol.Invalid as err:
        raise ValidationError("Invalid configuration. {}: {}".format(
            _key_path(err), err.msg))
    names = [region[CONF_NAME] for region in config[CONF_REGIONS]]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ValidationError("Invalid configuration. regions: duplicate "
                              "names {}".format(', '.join(duplicates)))
    unknown = [name for name in config[CONF_SOURCE][CONF_REGIONS]
               if name not in names]
    if unknown:
        raise ValidationError("Invalid configuration. source.regions: "
                              "unknown regions {}".format(', '.join(unknown)))
    return config


def load_yaml(path):
    """Reads a yaml file, or config.yaml inside a directory, and validates."""
    config_file = path
    if os.path.isdir(path):
        config_file = os.path.join(path, FILE_CONFIG)
    if not os.path.isfile(config_file):
        raise FileNotFoundError("{} is not a valid file".format(config_file))
    with open(config_file, 'r') as yamlfile:
        try:
            cfg = yaml.safe_load(yamlfile)
        except yaml.YAMLError as err:
            raise OSError("cannot parse {}: {}".format(config_file, err))
    LOGGER.debug("Loaded configuration from %s", config_file)
    return validate(cfg)
