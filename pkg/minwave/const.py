"""Various constants used within minwave."""

MAJOR_VERSION = 0
MINOR_VERSION = 1
PATCH_VERSION = 0

__version__ = '{}.{}.{}'.format(MAJOR_VERSION, MINOR_VERSION, PATCH_VERSION)

PROJECT_NAME = 'minwave'
PROJECT_LICENSE = 'MIT'
PROJECT_AUTHOR = "minwave developers"
PROJECT_URL = 'https://github.com/minwave/minwave'
PROJECT_EMAIL = 'minwave@users.noreply.github.com'

#### PHYSICS ####
ELASTIC = 'elastic'
ACOUSTIC = 'acoustic'
ELECTROMAGNETIC = 'electromagnetic'
PHYSICS = (ELASTIC, ACOUSTIC, ELECTROMAGNETIC)

CONVENTION_PLUS = '+iwt'
CONVENTION_MINUS = '-iwt'

#### TOLERANCES ####
STRICT_RELATIVE = 1e-10
DEGENERATE_CELL = 1e-12
HS_MARGIN = 1e-8
SINGULAR_RADIUS = 1e-8
THETA_SCAN_POINTS = 180
BRANCH_CLUSTER = 1e-8
DIRECTION_PERTURBATION = 1e-9
VOXELS_PER_DECAY = 4

#### QUADRATURE ####
DEFAULT_POLAR_ORDER = 32
GREAT_CIRCLE_ORDER = 256

#### CONFIG ####
CONF_RUN_ID = 'run_id'
CONF_UNITS = 'units'
CONF_PHYSICS = 'physics'
CONF_FREQUENCY = 'frequency'
CONF_CONVENTION = 'time_convention'
CONF_GEOMETRY = 'geometry'
CONF_INTERVAL = 'interval'
CONF_RECTANGLE = 'rectangle'
CONF_CELLS = 'cells'
CONF_REGIONS = 'regions'
CONF_NAME = 'name'
CONF_BOX = 'box'
CONF_STIFFNESS = 'stiffness'
CONF_DENSITY = 'density'
CONF_BULK = 'bulk_modulus'
CONF_PERMITTIVITY = 'permittivity'
CONF_PERMEABILITY = 'permeability'
CONF_BOUNDARY = 'boundary'
CONF_TYPE = 'type'
CONF_VALUE = 'value'
CONF_PRIMAL = 'primal'
CONF_TRACE = 'trace'
CONF_SOURCE = 'source'
CONF_BODY_FORCE = 'body_force'
CONF_SOLVER = 'solver'
CONF_MAX_ITER = 'max_iterations'
CONF_TOLERANCE = 'tolerance'
CONF_PRECONDITIONER = 'preconditioner'
CONF_SEED = 'seed'
CONF_ROTATION = 'rotation'
CONF_RANDOM_START = 'random_start'
CONF_TOMOGRAPHY = 'tomography'
CONF_TRIAL = 'trial'
CONF_RANDOM_TRIALS = 'random_trials'
CONF_HS = 'hs'
CONF_SCALE = 'scale'
CONF_REFERENCE = 'reference_region'
CONF_POLARIZATION = 'polarization'
CONF_GREENS = 'greens'
CONF_MEDIUM = 'medium'
CONF_POINTS = 'points'
CONF_QUADRATURE = 'quadrature_order'
CONF_LOGGER = 'logger'
CONF_FILE = 'file'
CONF_LEVEL = 'level'
CONF_OUTPUT = 'output'
CONF_DIR = 'directory'
CONF_NODES = 'nodes'
CONF_ELEMENTS = 'elements'
CONF_D = 'd'
CONF_Q = 'q'
CONF_BLOCKS = ('d1', 'd2', 'd3', 'q1', 'q2', 'q3')

AUTO = 'auto'

#### OUTPUT FILES ####
FILE_FIELDS = 'fields.csv'
FILE_HISTORY = 'history.csv'
FILE_SUMMARY = 'summary.json'
FILE_GREENS = 'greens.csv'
FILE_SLACK = 'slack.csv'
FILE_HS = 'hs.csv'
FILE_POLARIZATION = 'polarization.csv'
FILE_NODES = 'nodes.csv'
FILE_CELLS = 'cells.csv'
FILE_CONFIG = 'config.yaml'

DIRICHLET = 'dirichlet'
NEUMANN = 'neumann'
CUSTOM = 'custom'
ESSENTIAL = 'essential'
NATURAL = 'natural'

PRECOND_NONE = 'none'
PRECOND_JACOBI = 'block_jacobi'

#### ARGUMENTS ####
ARG_COMMAND = 'command'
ARG_CONFIG = 'config'
ARG_OUT_DIR = 'out_dir'
ARG_TOLERANCE = 'tolerance'
ARG_MAX_ITERS = 'max_iters'
ARG_QUADRATURE = 'quadrature_order'
ARG_SEED = 'seed'

CMD_SOLVE = 'solve'
CMD_VALIDATE = 'validate'
CMD_TOMOGRAPHY = 'tomography'
CMD_HS = 'hs-bound'
CMD_GREENS = 'greens-table'
COMMANDS = (CMD_SOLVE, CMD_VALIDATE, CMD_TOMOGRAPHY, CMD_HS, CMD_GREENS)

#### EXIT CODES ####
EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3

#### ENVIRONMENT ####
ENV_THREADS = 'MINWAVE_THREADS'
