"""
Experiments Module

Runs the command-line experiments: filter and needlet profiles, a single
approximation, the convergence study over Wendland indices and orders, and
the localized refinement run. Each run writes one CSV table.
"""

import copy
import os
import re
import time
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from src.csv_writer import CSVWriter
from src.errors import ConfigurationError, DomainError
from src.filters import build_needlet_filter, sample_filters
from src.local_refinement import cap_center_counts, localized_approximate, parse_cap
from src.needlets import (
    NeedletFrame,
    analyze,
    build_frame,
    export_coefficients,
    filtered_hyperinterpolation,
    level_decay,
    needlet_profile,
    synthesize,
)
from src.quadrature import (
    QuadratureRule,
    discretization_degree,
    discretization_rule,
    needlet_quadrature_sequence,
    parse_quadrature_source,
    rule_for_degree,
)
from src.test_functions import (
    MAX_WENDLAND_INDEX,
    WendlandTestFunction,
    convergence_slope,
    discrete_l2_error,
    fourier_coeff_table,
    semidiscrete_l2_error,
)

logger = logging.getLogger(__name__)

# smallest evaluation rule used for discrete L2 errors
MIN_EVALUATION_DEGREE = 31
# tensor rules at exactly 3*2^(J-1)-1 alias enough to inflate the discrete
# error by 20-45% for J = 2..5; ten more degrees bring it within 0.2%
DEFAULT_DISC_DEGREE_EXTRA = 10

DEFAULT_CONFIG: Dict[str, Any] = {
    'filter': {
        'kappa': 5,
        'samples': 501,
    },
    'quadrature': {
        'source': 'tensor',
        'design_dir': None,
        'fallback': True,
    },
    'approximation': {
        'order': 4,
        'orders': [1, 2, 3, 4, 5],
        'wendland': [0, 1, 2],
        'method': 'needlet',
        'allow_uncertified': False,
        'disc_degree_extra': DEFAULT_DISC_DEGREE_EXTRA,
        'disc_degree': None,
        'evaluation_degree': None,
        'workers': 1,
        'chunk_size': 512,
    },
    'kernel': {
        'level': 3,
        'samples': 361,
    },
    'fourier': {
        'truncation': 500,
        'cache_dir': None,
    },
    'local': {
        'cap': '0,1,0:0.5235987755982988',
        'j_low': 4,
        'j_high': 6,
        'wendland': 2,
    },
    'output': {
        'directory': 'output',
        'grid': '45x90',
        'coefficients': None,
        'timing': False,
    },
}

_GRID_PATTERN = re.compile(r'^(\d+)\s*[x×]\s*(\d+)$')


def resolve_env_values(config: Any) -> Any:
    """Replace 'env:VAR' strings by the environment value (None if unset)."""
    if isinstance(config, dict):
        return {key: resolve_env_values(value) for key, value in config.items()}
    if isinstance(config, list):
        return [resolve_env_values(value) for value in config]
    if isinstance(config, str) and config.startswith('env:'):
        return os.environ.get(config[4:]) or None
    return config


def merge_config(base: Dict, overrides: Dict) -> Dict:
    """Recursive dict merge; values in overrides win."""
    merged = copy.deepcopy(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str]) -> Dict:
    """
    Load the YAML configuration on top of the built-in defaults.

    A missing file is not an error: every value has a default.

    Raises:
        ConfigurationError: If the file exists but cannot be parsed
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if not config_path:
        return config

    config_file = Path(config_path)
    if not config_file.exists():
        logger.warning(f"⚠️  Configuration file not found: {config_path}; using defaults")
        return config

    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
    except Exception as e:
        logger.error(f"Error loading configuration: {str(e)}")
        raise ConfigurationError(f"Failed to load config {config_path}: {e}") from e

    if not isinstance(loaded, dict):
        raise ConfigurationError(f"Config {config_path} must be a mapping")

    logger.info(f"📄 Configuration loaded from {config_path}")
    return resolve_env_values(merge_config(config, loaded))


def parse_int_list(text: str) -> List[int]:
    """Parse '1-5', '0,1,2' or a mix such as '0,3-4'."""
    values: List[int] = []
    try:
        for part in str(text).split(','):
            part = part.strip()
            if not part:
                continue
            if '-' in part[1:]:
                low, high = part.split('-', 1)
                values.extend(range(int(low), int(high) + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise DomainError(f"Expected integers like '1-5' or '0,1,2', got {text!r}")
    if not values:
        raise DomainError(f"Empty integer list: {text!r}")
    return values


def latlong_grid(nlat: int, nlon: int) -> np.ndarray:
    """Equiangular grid: cell-centred colatitudes, longitudes 2 pi j / nlon."""
    if nlat < 1 or nlon < 1:
        raise DomainError(f"Grid needs positive sizes, got {nlat}x{nlon}")
    theta = (np.arange(nlat) + 0.5) * np.pi / nlat
    phi = np.arange(nlon) * 2.0 * np.pi / nlon
    th, ph = np.meshgrid(theta, phi, indexing='ij')
    return np.column_stack([
        (np.sin(th) * np.cos(ph)).ravel(),
        (np.sin(th) * np.sin(ph)).ravel(),
        np.cos(th).ravel(),
    ])


class NeedletExperiments:
    """
    Experiment runner.

    One method per command; each returns the path of the CSV it wrote.
    """

    def __init__(self, config: Dict):
        """
        Initialize runner with configuration.

        Args:
            config: Merged configuration (defaults, file, CLI overrides)
        """
        self.config = config
        self.filter_config = config.get('filter', {})
        self.quad_config = config.get('quadrature', {})
        self.approx_config = config.get('approximation', {})
        self.fourier_config = config.get('fourier', {})
        self.local_config = config.get('local', {})
        self.output_config = config.get('output', {})

        self.needlet_filter = build_needlet_filter(int(self.filter_config.get('kappa', 5)))
        self.source = parse_quadrature_source(
            self.quad_config.get('source', 'tensor'),
            default_dir=self.quad_config.get('design_dir'),
        )
        self.fallback = bool(self.quad_config.get('fallback', True))
        self.workers = int(self.approx_config.get('workers', 1))
        self.chunk_size = int(self.approx_config.get('chunk_size', 512))
        self.writer = CSVWriter(config)
        self.warnings: List[str] = []
        self.uncertified: List[str] = []

        logger.info(f"✅ Runner ready: kappa={self.needlet_filter.kappa}, quadrature={self.source.label}")

    # ------------------------------------------------------------------ helpers

    def _check_wendland(self, indices: Sequence[int]) -> List[int]:
        indices = [int(k) for k in indices]
        for k in indices:
            if not 0 <= k <= MAX_WENDLAND_INDEX:
                raise DomainError(f"Wendland index must be in 0..{MAX_WENDLAND_INDEX}, got {k}")
        return indices

    def _note_fallback(self, rules: Sequence[QuadratureRule], what: str) -> None:
        if self.source.kind != 'dir':
            return
        fallen = [rule for rule in rules if rule.source == 'tensor']
        if fallen:
            message = f"{what}: {len(fallen)} rule(s) fell back to tensor products"
            if message not in self.warnings:
                self.warnings.append(message)
                logger.warning(f"⚠️  {message}")

    def build_frame(self, J: int) -> NeedletFrame:
        rules = needlet_quadrature_sequence(J, self.source, fallback=self.fallback)
        self._note_fallback(rules, f"needlet quadratures J={J}")
        return build_frame(J, self.needlet_filter, rules)

    def discretization_rule(self, J: int) -> QuadratureRule:
        """
        Discretization rule for order J.

        approximation.disc_degree fixes the degree outright; below the
        required 3*2^(J-1)-1 that needs allow_uncertified and the run is
        recorded as uncertified.
        """
        degree = self.approx_config.get('disc_degree')
        if degree is None:
            extra = int(self.approx_config.get('disc_degree_extra', DEFAULT_DISC_DEGREE_EXTRA))
            rule = discretization_rule(J, self.source, extra_degree=extra, fallback=self.fallback)
        else:
            rule = rule_for_degree(int(degree), self.source, fallback=self.fallback)
            required = discretization_degree(J)
            if rule.exactness_degree < required:
                message = (f"discretization J={J}: rule of degree {rule.exactness_degree} "
                           f"is below the required {required}")
                if not self.approx_config.get('allow_uncertified', False):
                    logger.error(message)
                    raise ConfigurationError(message)
                self.uncertified.append(message)
                self.warnings.append(f"{message} (uncertified)")
                logger.warning(f"⚠️  {message}; continuing uncertified")
        self._note_fallback([rule], f"discretization J={J}")
        return rule

    def evaluation_rule(self, J: int) -> QuadratureRule:
        degree = self.approx_config.get('evaluation_degree')
        degree = int(degree) if degree else max(2 ** (J + 1) + 1, MIN_EVALUATION_DEGREE)
        rule = rule_for_degree(degree, self.source, fallback=self.fallback)
        self._note_fallback([rule], f"evaluation degree {degree}")
        return rule

    def evaluation_points(self) -> np.ndarray:
        """Points from output.grid: 'nlat x nlon' or 'rule:<degree>'."""
        grid = str(self.output_config.get('grid', '45x90')).strip()
        if grid.startswith('rule:'):
            return rule_for_degree(int(grid[5:]), self.source, fallback=self.fallback).nodes
        match = _GRID_PATTERN.match(grid)
        if not match:
            raise DomainError(f"Grid must look like '45x90' or 'rule:<degree>', got {grid!r}")
        return latlong_grid(int(match.group(1)), int(match.group(2)))

    def approximation_values(self, f, frame: NeedletFrame, Q_disc: QuadratureRule,
                             points: np.ndarray) -> np.ndarray:
        """Order-J approximation at points, by needlets or by the kernel form."""
        allow = bool(self.approx_config.get('allow_uncertified', False))
        method = self.approx_config.get('method', 'needlet')
        if method == 'kernel':
            return filtered_hyperinterpolation(f, frame.J, frame.frame_filter, Q_disc, points,
                                               allow_uncertified=allow,
                                               chunk_size=self.chunk_size, workers=self.workers)
        if method != 'needlet':
            raise ConfigurationError(f"approximation.method must be needlet or kernel, got {method!r}")
        coeffs = analyze(f, frame, Q_disc, allow_uncertified=allow,
                         chunk_size=self.chunk_size, workers=self.workers)
        return synthesize(coeffs, frame, points, chunk_size=self.chunk_size, workers=self.workers)

    def _footer(self, lines: Optional[List[str]] = None) -> List[str]:
        return list(lines or []) + [f"warning: {message}" for message in self.warnings]

    def _out(self, default_name: str) -> str:
        return self.output_config.get('file') or default_name

    # ----------------------------------------------------------------- commands

    def run_filter(self) -> str:
        """Samples of h and H on [0, 2.5]."""
        samples = int(self.filter_config.get('samples', 501))
        table = sample_filters(self.needlet_filter, np.linspace(0.0, 2.5, samples))
        coefficients = ', '.join(str(a) for a in self.needlet_filter.coefficients)
        return self.writer.write_table(table, self._out('filter.csv'), 'filter',
                                       footer=[f"coefficients: {coefficients}"])

    def run_kernel(self) -> str:
        """Profile of a level-j needlet against geodesic distance."""
        kernel_config = self.config.get('kernel', {})
        level = int(kernel_config.get('level', 3))
        samples = int(kernel_config.get('samples', 361))
        frame = self.build_frame(level)
        table = needlet_profile(frame, level, np.linspace(0.0, np.pi, samples))
        table.insert(0, 'j', level)
        return self.writer.write_table(table, self._out('kernel.csv'), 'kernel',
                                       footer=self._footer())

    def run_approx(self) -> str:
        """
        One order-J approximation of f_k.

        Writes the level-decay table; both L2 errors go to the footer. With
        output.coefficients set, the needlet coefficients are exported too.
        """
        J = int(self.approx_config.get('order', 4))
        wendland = self.approx_config.get('wendland', 2)
        k = self._check_wendland(wendland[:1] if isinstance(wendland, list) else [wendland])[0]
        allow = bool(self.approx_config.get('allow_uncertified', False))
        f = WendlandTestFunction(k)

        frame = self.build_frame(J)
        Q_disc = self.discretization_rule(J)
        eval_rule = self.evaluation_rule(J)

        coeffs = analyze(f, frame, Q_disc, allow_uncertified=allow,
                         chunk_size=self.chunk_size, workers=self.workers)
        approx = synthesize(coeffs, frame, eval_rule.nodes,
                            chunk_size=self.chunk_size, workers=self.workers)
        discrete = discrete_l2_error(approx, f, eval_rule)
        semidiscrete = semidiscrete_l2_error(k, J, frame.frame_filter,
                                             L_trunc=int(self.fourier_config.get('truncation', 500)),
                                             strict=False, table=self._fourier_table(k))

        coefficient_path = self.output_config.get('coefficients')
        if coefficient_path:
            export_coefficients(coeffs, coefficient_path)

        decay = level_decay(f, frame, Q_disc, self.evaluation_points(),
                            chunk_size=self.chunk_size, workers=self.workers)
        footer = [
            f"k: {k}",
            f"J: {J}",
            f"semidiscrete_error: {semidiscrete:.17g}",
            f"discrete_error: {discrete:.17g}",
            f"node_counts: {'|'.join(str(n) for n in frame.node_counts)}",
        ]
        print(f"   📉 k={k} J={J}: semidiscrete {semidiscrete:.3e}, discrete {discrete:.3e}")
        return self.writer.write_table(decay, self._out('approx.csv'), 'approx',
                                       footer=self._footer(footer))

    def _fourier_table(self, k: int):
        return fourier_coeff_table(k, int(self.fourier_config.get('truncation', 500)),
                                   cache_dir=self.fourier_config.get('cache_dir'))

    def run_convergence(self) -> str:
        """
        L2 errors of the order-J approximations of f_k for every (k, J).

        Rows: k, J, semidiscrete_error, discrete_error, node_counts, wall_time.
        The fitted log2-slope per k is appended as a comment.
        """
        ks = self._check_wendland(self.approx_config.get('wendland', [0, 1, 2]))
        orders = [int(J) for J in self.approx_config.get('orders', [1, 2, 3, 4, 5])]
        if min(orders) < 0:
            raise DomainError(f"Orders must be >= 0, got {orders}")
        truncation = int(self.fourier_config.get('truncation', 500))
        timing = bool(self.output_config.get('timing', False))

        eval_rule = self.evaluation_rule(max(orders))
        frames = {J: self.build_frame(J) for J in orders}
        disc_rules = {J: self.discretization_rule(J) for J in orders}

        rows = []
        for k, J in tqdm([(k, J) for k in ks for J in orders], desc="   Convergence runs"):
            f = WendlandTestFunction(k)
            started = time.perf_counter()
            approx = self.approximation_values(f, frames[J], disc_rules[J], eval_rule.nodes)
            discrete = discrete_l2_error(approx, f, eval_rule)
            semidiscrete = semidiscrete_l2_error(k, J, frames[J].frame_filter, L_trunc=truncation,
                                                 strict=False, table=self._fourier_table(k))
            elapsed = time.perf_counter() - started
            rows.append({
                'k': k,
                'J': J,
                'semidiscrete_error': semidiscrete,
                'discrete_error': discrete,
                'node_counts': '|'.join(str(n) for n in frames[J].node_counts),
                'wall_time': round(elapsed, 3) if timing else 0.0,
            })
            logger.debug(f"k={k} J={J}: semidiscrete {semidiscrete:.6e}, discrete {discrete:.6e}")

        table = pd.DataFrame(rows)
        footer = [f"evaluation_rule: {eval_rule.describe()}"]
        for k in ks:
            subset = table[table['k'] == k]
            slope = convergence_slope(subset['J'], subset['discrete_error'])
            semi_slope = convergence_slope(subset['J'], subset['semidiscrete_error'])
            footer.append(f"slope k={k}: discrete {slope:.6f}, semidiscrete {semi_slope:.6f}")
            print(f"   📈 k={k}: log2 error slope {slope:.3f}")

        return self.writer.write_table(table, self._out('convergence.csv'), 'convergence',
                                       footer=self._footer(footer))

    def run_local(self) -> str:
        """
        Localized approximation of f_k on the evaluation grid.

        Rows: x, y, z, f_value, approx_value, abs_error, in_cap. Per-level
        centre counts follow as comments.
        """
        cap = parse_cap(str(self.local_config.get('cap')))
        J_low = int(self.local_config.get('j_low', 4))
        J_high = int(self.local_config.get('j_high', 6))
        if J_low > J_high:
            raise DomainError(f"j_low={J_low} exceeds j_high={J_high}")
        k = self._check_wendland([self.local_config.get('wendland', 2)])[0]
        allow = bool(self.approx_config.get('allow_uncertified', False))
        f = WendlandTestFunction(k)

        frame = self.build_frame(J_high)
        Q_disc = self.discretization_rule(J_high)
        points = self.evaluation_points()

        approx = localized_approximate(f, cap, J_low, J_high, frame, Q_disc, points,
                                       allow_uncertified=allow,
                                       chunk_size=self.chunk_size, workers=self.workers)
        f_values = f(points)
        table = pd.DataFrame({
            'x': points[:, 0],
            'y': points[:, 1],
            'z': points[:, 2],
            'f_value': f_values,
            'approx_value': approx,
            'abs_error': np.abs(approx - f_values),
            'in_cap': cap.contains(points),
        })

        counts = cap_center_counts(frame, cap)
        footer = [f"cap: center={cap.center} radius={cap.radius:.17g} "
                  f"area_fraction={cap.area_fraction():.6f}"]
        footer += [f"centers j={row.j}: {row.in_cap}/{row.total}" for row in counts.itertuples()]

        outside = ~table['in_cap']
        if outside.any():
            print(f"   📍 max error outside cap: {table.loc[outside, 'abs_error'].max():.3e}")
        if (~outside).any():
            print(f"   📍 max error inside cap: {table.loc[~outside, 'abs_error'].max():.3e}")
        return self.writer.write_table(table, self._out('local.csv'), 'local',
                                       footer=self._footer(footer))

    def run(self, command: str) -> str:
        commands = {
            'filter': self.run_filter,
            'kernel': self.run_kernel,
            'approx': self.run_approx,
            'convergence': self.run_convergence,
            'local': self.run_local,
        }
        if command not in commands:
            raise DomainError(f"Unknown command: {command!r}")
        return commands[command]()
