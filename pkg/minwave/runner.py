"""Module that turns a run configuration into problems and runs commands."""
import copy
import logging
import numpy as np
import minwave.reader as reader
import minwave.writer as writer
from minwave.const import (CONF_RUN_ID, CONF_PHYSICS, CONF_FREQUENCY,
                           CONF_CONVENTION, CONF_GEOMETRY, CONF_INTERVAL,
                           CONF_RECTANGLE, CONF_CELLS, CONF_NODES,
                           CONF_ELEMENTS, CONF_REGIONS, CONF_NAME, CONF_BOX,
                           CONF_STIFFNESS, CONF_DENSITY, CONF_BULK,
                           CONF_PERMITTIVITY, CONF_PERMEABILITY,
                           CONF_BOUNDARY, CONF_TYPE, CONF_VALUE, CONF_PRIMAL,
                           CONF_TRACE, CONF_SOURCE, CONF_BODY_FORCE,
                           CONF_SOLVER, CONF_MAX_ITER, CONF_TOLERANCE,
                           CONF_PRECONDITIONER, CONF_SEED, CONF_ROTATION,
                           CONF_RANDOM_START, CONF_POLARIZATION,
                           CONF_TOMOGRAPHY, CONF_TRIAL, CONF_RANDOM_TRIALS,
                           CONF_HS, CONF_SCALE, CONF_REFERENCE, CONF_GREENS,
                           CONF_MEDIUM, CONF_POINTS, CONF_QUADRATURE,
                           CONF_D, CONF_Q, CONF_BLOCKS, CONF_OUTPUT, CONF_DIR)
from minwave.const import (ELASTIC, ACOUSTIC, CUSTOM, ARG_OUT_DIR,
                           ARG_TOLERANCE, ARG_MAX_ITERS, ARG_QUADRATURE,
                           ARG_SEED, CMD_SOLVE, CMD_VALIDATE, CMD_TOMOGRAPHY,
                           CMD_HS, CMD_GREENS, EXIT_OK, EXIT_IO,
                           EXIT_VALIDATION, EXIT_CONVERGENCE, FILE_FIELDS,
                           FILE_HISTORY, FILE_SUMMARY, FILE_GREENS,
                           FILE_SLACK, FILE_HS, FILE_NODES, FILE_CELLS,
                           FILE_POLARIZATION)
from minwave.exceptions import (MinwaveError, ValidationError,
                                ConvergenceError)
from minwave.fields import (Layout, BoundaryCondition, CELL,
                            complete_trial_field)
from minwave.functional import (evaluate_functional, minimum_value_surface,
                                tomography_slack, dissipation_rate,
                                boundary_power, SurfaceData)
from minwave.greens import greens_table
from minwave.hs import (ComparisonMedium, Polarization, region_comparison,
                        classify_bound, exact_polarization, evaluate_hs,
                        minimize_hs)
from minwave.mesh import Mesh
from minwave.moduli import ComplexModuli
from minwave.solver import (Problem, SolveOptions, minimize_cg,
                            solve_direct_complex, cross_validate)
from minwave.summary import (SummaryRecord, solver_entry, passivity_entry,
                             dissipation_entry)

LOGGER = logging.getLogger(__name__)

OVERRIDES = (
    (ARG_TOLERANCE, (CONF_SOLVER, CONF_TOLERANCE)),
    (ARG_MAX_ITERS, (CONF_SOLVER, CONF_MAX_ITER)),
    (ARG_SEED, (CONF_SOLVER, CONF_SEED)),
    (ARG_OUT_DIR, (CONF_OUTPUT, CONF_DIR)),
)


def apply_overrides(config, overrides=None):
    """Copy of config with command-line values taking precedence."""
    config = copy.deepcopy(config)
    overrides = overrides or {}
    for arg, (section, key) in OVERRIDES:
        if overrides.get(arg) is not None:
            config[section][key] = overrides[arg]
    if overrides.get(ARG_QUADRATURE) is not None and CONF_GREENS in config:
        config[CONF_GREENS][CONF_QUADRATURE] = overrides[ARG_QUADRATURE]
    return config


def _require(config, key, command):
    """Value of a top-level key the command cannot run without."""
    if config.get(key) is None:
        raise ValidationError("'{}' needs '{}' in the configuration".format(
            command, key))
    return config[key]


def build_mesh(config, command=CMD_SOLVE):
    """Mesh from the geometry section, tagged by the configured regions."""
    geometry = _require(config, CONF_GEOMETRY, command)
    regions = [(region[CONF_NAME], region.get(CONF_BOX))
               for region in config[CONF_REGIONS]]
    if CONF_NODES in geometry or CONF_ELEMENTS in geometry:
        if CONF_NODES not in geometry or CONF_ELEMENTS not in geometry:
            raise ValidationError("geometry tables need both 'nodes' and "
                                  "'elements'")
        return reader.read_mesh(geometry[CONF_NODES], geometry[CONF_ELEMENTS])
    cells = geometry.get(CONF_CELLS)
    if CONF_INTERVAL in geometry:
        if not isinstance(cells, int):
            raise ValidationError("an interval needs an integer cell count")
        start, stop = geometry[CONF_INTERVAL]
        return Mesh.interval(start, stop, cells, regions)
    if CONF_RECTANGLE in geometry:
        if not isinstance(cells, list):
            raise ValidationError("a rectangle needs cells: [nx, ny]")
        width, height = geometry[CONF_RECTANGLE]
        return Mesh.rectangle(width, height, cells[0], cells[1], regions)
    raise ValidationError("geometry needs an interval, a rectangle or "
                          "node and element tables")


def _entry(region, key):
    """Modulus of a region or a ValidationError naming both."""
    if key not in region:
        raise ValidationError("region '{}' needs '{}'".format(
            region[CONF_NAME], key))
    return region[key]


def build_moduli(config, region):
    """ComplexModuli of one configured region."""
    physics = config[CONF_PHYSICS]
    frequency = config[CONF_FREQUENCY]
    name = region[CONF_NAME]
    if physics == ELASTIC:
        return ComplexModuli.elastic(_entry(region, CONF_STIFFNESS),
                                     _entry(region, CONF_DENSITY), frequency,
                                     region=name)
    if physics == ACOUSTIC:
        return ComplexModuli.acoustic(_entry(region, CONF_BULK),
                                      _entry(region, CONF_DENSITY), frequency,
                                      region=name)
    return ComplexModuli.electromagnetic(
        _entry(region, CONF_PERMITTIVITY), _entry(region, CONF_PERMEABILITY),
        frequency, region=name, convention=config[CONF_CONVENTION])


def build_conditions(config):
    """BoundaryCondition per configured side."""
    conditions = []
    for side, entry in sorted(config[CONF_BOUNDARY].items()):
        primal = trace = None
        if entry[CONF_TYPE] == CUSTOM:
            for key in (CONF_PRIMAL, CONF_TRACE):
                if key not in entry:
                    raise ValidationError("custom boundary on '{}' needs "
                                          "'{}'".format(side, key))
            primal = (entry[CONF_PRIMAL][CONF_TYPE],
                      entry[CONF_PRIMAL][CONF_VALUE])
            trace = (entry[CONF_TRACE][CONF_TYPE],
                     entry[CONF_TRACE][CONF_VALUE])
        conditions.append(BoundaryCondition(side, entry[CONF_TYPE],
                                            entry[CONF_VALUE], primal, trace))
    return conditions


def build_force(config, layout):
    """Source vector from the configured body force, or None."""
    source = config[CONF_SOURCE]
    value = np.atleast_1d(source[CONF_BODY_FORCE])
    if not np.any(value):
        return None
    mesh = layout.mesh
    size = layout.cell_size if layout.source_on == CELL else \
        layout.nodal_size
    if value.size not in (1, size):
        raise ValidationError("body force needs 1 or {} components".format(
            size))
    names = source[CONF_REGIONS] or mesh.region_names
    selected = np.isin(np.array(mesh.region_names)[mesh.tags], names)
    per_cell = np.zeros((mesh.n_cells, size), dtype=complex)
    per_cell[selected] = value
    return layout.project_force(per_cell)


def build_problem(config, command=CMD_SOLVE):
    """Problem and physical source vector described by the configuration."""
    physics = _require(config, CONF_PHYSICS, command)
    frequency = _require(config, CONF_FREQUENCY, command)
    mesh = build_mesh(config, command)
    configured = {region[CONF_NAME]: region
                  for region in config[CONF_REGIONS]}
    regions = {}
    for name in mesh.region_names:
        if name not in configured:
            raise ValidationError("mesh region '{}' has no moduli".format(
                name))
        regions[name] = build_moduli(config, configured[name])
    lossless = all(np.all(moduli.dual.imag == 0)
                   for moduli in regions.values())
    if lossless:
        LOGGER.info("Dual modulus is lossless, using the reduced form")
    force = build_force(config, Layout(physics, mesh, frequency))
    problem = Problem.build(physics, mesh, frequency, regions,
                            build_conditions(config), force=force,
                            lossless=lossless,
                            rotation=config[CONF_SOLVER][CONF_ROTATION])
    return problem, force


def solve_options(config):
    """SolveOptions from the solver section."""
    solver = config[CONF_SOLVER]
    return SolveOptions(max_iterations=solver[CONF_MAX_ITER],
                        tolerance=solver[CONF_TOLERANCE],
                        preconditioner=solver[CONF_PRECONDITIONER],
                        seed=solver[CONF_SEED],
                        random_start=solver.get(CONF_RANDOM_START, False))


def _physical_medium(problem):
    """Medium with any solver rotation undone."""
    if problem.theta:
        return problem.medium.rotated(-problem.theta)
    return problem.medium


class Run(object):
    """One subcommand run with its output files and summary record."""

    def __init__(self, config, command):
        """Initialize output naming."""
        self.config = config
        self.command = command
        self.directory = config[CONF_OUTPUT][CONF_DIR]
        self.summary = SummaryRecord(config, command)

    def path(self, name):
        """Output path of one artifact."""
        return writer.output_path(self.directory, self.config[CONF_RUN_ID],
                                  self.command, name)

    def artifact(self, function, name, *args):
        """Writes an artifact and records it."""
        path = self.path(name)
        function(path, *args)
        self.summary.add_artifact(path)
        return path

    def finish(self):
        """Writes the summary record."""
        return writer.write_summary(self.path(FILE_SUMMARY),
                                    self.summary.record)

    def field_outputs(self, problem, fields, report=None):
        """Field, mesh and history tables."""
        self.artifact(writer.write_fields, FILE_FIELDS, fields)
        node_file, cell_file = self.path(FILE_NODES), self.path(FILE_CELLS)
        writer.write_mesh(node_file, cell_file, problem.layout.mesh)
        self.summary.add_artifact(node_file)
        self.summary.add_artifact(cell_file)
        if report is not None:
            self.artifact(writer.write_history, FILE_HISTORY, report)

    def energy_entries(self, problem, field, fields, force):
        """Functional value, boundary identity and power balance."""
        if not problem.lossless:
            value = evaluate_functional(field, problem.operator,
                                        problem.source).total
            entry = {'value': value}
            if not problem.source.has_force:
                surface = SurfaceData.from_fields(
                    fields.rotated(problem.theta))
                expected = minimum_value_surface(surface, problem.source)
                entry['surface_value'] = expected
                entry['identity_error'] = abs(value - expected) / max(
                    abs(expected), 1e-300)
            self.summary.add('functional', entry)
        dissipation = dissipation_rate(fields, _physical_medium(problem),
                                       force)
        power = boundary_power(fields, force)
        if dissipation.mean_power <= 0 and fields.norm() > 0:
            LOGGER.warning("Dissipated power %.3g is not positive",
                           dissipation.mean_power)
        self.summary.add('dissipation', dissipation_entry(dissipation, power))


def run_solve(run):
    """CG solve with field tables and summary."""
    problem, force = build_problem(run.config, run.command)
    run.summary.add('rotation', problem.theta)
    try:
        field, report = minimize_cg(problem, solve_options(run.config))
    except ConvergenceError as err:
        if err.best is not None:
            run.field_outputs(problem, problem.complex_fields(err.best))
        if err.report is not None:
            run.summary.add('solver', solver_entry(err.report))
        run.finish()
        raise
    fields = problem.complex_fields(field)
    run.summary.add('solver', solver_entry(report))
    run.field_outputs(problem, fields, report)
    run.energy_entries(problem, field, fields, force)


def run_validate(run):
    """Passivity check and CG against the direct complex solve."""
    problem, force = build_problem(run.config, run.command)
    run.summary.add('passivity', passivity_entry(_physical_medium(problem)))
    problem.medium.check(allow_lossless_dual=problem.lossless)
    field, report = minimize_cg(problem, solve_options(run.config))
    fields = problem.complex_fields(field)
    oracle = solve_direct_complex(problem)
    validation = cross_validate(fields, oracle, problem)
    run.summary.add('solver', solver_entry(report))
    run.summary.add('cross_validation', validation.as_dict())
    run.field_outputs(problem, fields, report)
    run.energy_entries(problem, field, fields, force)
    LOGGER.info("CG against direct solve: relative field error %.3e",
                validation.field_error)


def _random_trial(layout, generator):
    """Force-free trial field with random primary unknowns."""
    return complete_trial_field(layout,
                                generator.standard_normal(layout.n_nodal),
                                generator.standard_normal(layout.n_cell),
                                generator.standard_normal(layout.n_trace))


def run_tomography(run):
    """Slack of the boundary bound for exact and trial fields."""
    problem, _ = build_problem(run.config, run.command)
    if problem.source.has_force or problem.lossless:
        raise ValidationError("tomography needs a force-free problem with a "
                              "lossy dual modulus")
    oracle = solve_direct_complex(problem)
    measured = SurfaceData.from_fields(oracle.rotated(problem.theta))
    operator = problem.operator
    trials = [('exact', problem.field_from_complex(oracle))]
    options = run.config[CONF_TOMOGRAPHY]
    if CONF_TRIAL in options:
        fields = reader.read_fields(options[CONF_TRIAL], problem.layout)
        trials.append(('file', problem.field_from_complex(fields)))
    generator = np.random.RandomState(run.config[CONF_SOLVER][CONF_SEED])
    for index in range(options[CONF_RANDOM_TRIALS]):
        trials.append(('random_{}'.format(index),
                       _random_trial(problem.layout, generator)))
    rows = []
    for name, trial in trials:
        slack = tomography_slack(trial, measured, operator)
        energy = evaluate_functional(trial, operator, problem.source).total
        scale = max(abs(energy), abs(slack), 1e-300)
        if slack < -1e-10 * scale:
            LOGGER.warning("Trial %s violates the bound by %.3g", name,
                           slack)
        rows.append((name, slack, scale))
    run.artifact(writer.write_table, FILE_SLACK, ('trial', 'slack', 'scale'),
                 rows)
    run.summary.add('tomography', {
        'exact_slack': rows[0][1] / rows[0][2],
        'min_relative_slack': min(slack / scale for _, slack, scale in rows),
        'trials': len(rows)})


def run_hs(run):
    """Hashin-Shtrikman values against the primal minimum."""
    problem, _ = build_problem(run.config, run.command)
    options = run.config[CONF_HS]
    comparison = region_comparison(problem, options[CONF_SCALE],
                                   options.get(CONF_REFERENCE))
    operator = problem.operator
    kind = classify_bound(operator, comparison, problem.layout)
    solve = solve_options(run.config)
    field, _ = minimize_cg(problem, solve)
    primal = evaluate_functional(field, operator, problem.source).total
    exact_t = exact_polarization(field, operator, comparison)
    exact = evaluate_hs(field, exact_t, operator, comparison, problem.source)
    run.artifact(writer.write_polarization, FILE_POLARIZATION, exact_t)
    trials = []
    if CONF_POLARIZATION in options:
        trials.append(('file', reader.read_polarization(
            options[CONF_POLARIZATION], problem.layout)))
    seed = run.config[CONF_SOLVER][CONF_SEED] or 0
    for index in range(options[CONF_RANDOM_TRIALS]):
        trials.append(('random_{}'.format(index),
                       Polarization.random(problem.layout, seed + index)))
    rows = []
    for name, polarization in trials:
        _, value = minimize_hs(problem, polarization, comparison, solve)
        rows.append((name, value, primal, value - primal))
    run.artifact(writer.write_table, FILE_HS,
                 ('trial', 'hs_value', 'primal_value', 'gap'), rows)
    run.summary.add('hs', {
        'bound': kind, 'primal_value': primal, 'exact_hs_value': exact,
        'exact_error': abs(exact - primal) / max(abs(primal), 1e-300),
        'min_gap': min((row[3] for row in rows), default=None),
        'trials': len(rows)})


def build_comparison(config):
    """Comparison medium of the greens section."""
    medium = config[CONF_GREENS][CONF_MEDIUM]
    if CONF_D in medium:
        return ComparisonMedium.scalar(medium[CONF_D], medium[CONF_Q])
    return ComparisonMedium.from_dq(*(medium[key] for key in CONF_BLOCKS))


def run_greens(run):
    """Table of G at the configured points."""
    frequency = _require(run.config, CONF_FREQUENCY, run.command)
    greens = _require(run.config, CONF_GREENS, run.command)
    rows = greens_table(greens[CONF_POINTS], frequency,
                        build_comparison(run.config),
                        greens[CONF_QUADRATURE])
    run.artifact(writer.write_greens, FILE_GREENS, rows)
    run.summary.add('greens', {'points': len(greens[CONF_POINTS]),
                               'quadrature_order': greens[CONF_QUADRATURE],
                               'entries': len(rows)})


COMMANDS = {
    CMD_SOLVE: run_solve,
    CMD_VALIDATE: run_validate,
    CMD_TOMOGRAPHY: run_tomography,
    CMD_HS: run_hs,
    CMD_GREENS: run_greens,
}


def run(config, command, overrides=None):
    """Runs a subcommand on a validated configuration; returns exit code."""
    if command not in COMMANDS:
        LOGGER.error("Unknown command %s", command)
        return EXIT_VALIDATION
    config = apply_overrides(config, overrides)
    current = Run(config, command)
    try:
        COMMANDS[command](current)
    except ConvergenceError as err:
        LOGGER.error("Solver did not converge: %s", err)
        return EXIT_CONVERGENCE
    except MinwaveError as err:
        LOGGER.error("%s", err)
        return EXIT_VALIDATION
    except OSError as err:
        LOGGER.error("I/O failure: %s", err)
        return EXIT_IO
    current.finish()
    LOGGER.info("Finished %s for run %s", command, config[CONF_RUN_ID])
    return EXIT_OK
