"""
Quadrature Module

Positive-weight quadrature rules on S² with certified polynomial exactness.

Rules integrate against the normalised surface measure (total mass 1). Two
sources are supported:
- tensor: Gauss-Legendre in cos(theta) crossed with equispaced azimuths
- dir:<path>: symmetric spherical t-design files ("x y z" per line) found by
  filename (sd<strength>.<N> or ss<strength>.<N>) or by a manifest.json
"""

import os
import re
import json
import math
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.errors import (
    CertificationError,
    ConfigurationError,
    DesignParseError,
    DesignValidationError,
    DomainError,
)
from src.special_functions import gauss_legendre, gegenbauer_series, iter_real_harmonics

logger = logging.getLogger(__name__)

EXACTNESS_TOL = 1e-10
SPHERE_TOL = 1e-8
RENORMALIZE_TOL = 1e-15
DESIGN_DIR_ENV = 'NEEDLETS_DESIGN_DIR'
MANIFEST_NAME = 'manifest.json'

_DESIGN_NAME = re.compile(r'^s[sd](\d+)\.(\d+)$')


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Quadrature rule on S² for the normalised measure.

    Attributes:
        nodes: Unit vectors, shape (N, 3)
        weights: Positive weights summing to 1, shape (N,)
        exactness_degree: Certified polynomial degree
        source: 'tensor' or 'design-file'
        path: Design file the rule came from, if any
    """

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    source: str = 'tensor'
    path: Optional[str] = None

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of function values at the nodes."""
        return float(np.dot(self.weights, values))

    def describe(self) -> str:
        origin = self.path if self.path else self.source
        return f"{self.size} nodes, degree {self.exactness_degree} ({origin})"


@dataclass
class ExactnessReport:
    """Outcome of an exactness check."""

    passed: bool
    degree: int
    worst_residual: float
    witness: Optional[Tuple[int, int]] = None
    residuals_by_degree: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class QuadratureSource:
    """Where rules come from: built-in tensor rules or a design directory."""

    kind: str = 'tensor'
    directory: Optional[Path] = None
    manifest: Optional[Path] = None

    @property
    def label(self) -> str:
        return 'tensor' if self.kind == 'tensor' else f"dir:{self.directory}"


def parse_quadrature_source(text: Optional[str], default_dir: Optional[str] = None) -> QuadratureSource:
    """
    Parse a "--quad" style source string.

    Args:
        text: 'tensor', 'dir:<path>', 'dir' (use default_dir or the
              NEEDLETS_DESIGN_DIR environment variable) or None (tensor)
        default_dir: Directory used by a bare 'dir'

    Returns:
        QuadratureSource
    """
    if text is None or text == 'tensor':
        return QuadratureSource()

    if text == 'dir' or text.startswith('dir:'):
        directory = text[4:] if text.startswith('dir:') else ''
        directory = directory or default_dir or os.environ.get(DESIGN_DIR_ENV, '')
        if not directory:
            raise ConfigurationError(
                f"No design directory given; use dir:<path> or set {DESIGN_DIR_ENV}"
            )
        path = Path(directory)
        if path.is_file() and path.suffix == '.json':
            return QuadratureSource(kind='dir', directory=path.parent, manifest=path)
        return QuadratureSource(kind='dir', directory=path)

    raise ConfigurationError(f"Unknown quadrature source: {text!r} (expected tensor or dir:<path>)")


@lru_cache(maxsize=64)
def tensor_rule(degree: int) -> QuadratureRule:
    """
    Tensor-product rule exact for spherical polynomials of degree <= degree.

    Gauss-Legendre with ceil((degree+1)/2) nodes in cos(theta) times
    degree+1 equispaced azimuths; weight (GL weight / 2) / (degree+1).

    Args:
        degree: Exactness degree (>= 0)

    Returns:
        QuadratureRule with source 'tensor'
    """
    if degree < 0:
        raise DomainError(f"Quadrature degree must be >= 0, got {degree}")

    n_polar = math.ceil((degree + 1) / 2)
    n_azimuth = degree + 1
    gl = gauss_legendre(n_polar)

    z = np.repeat(gl.nodes, n_azimuth)
    phi = np.tile(2.0 * np.pi * np.arange(n_azimuth) / n_azimuth, n_polar)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
    nodes = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    weights = np.repeat(gl.weights / 2.0, n_azimuth) / n_azimuth

    nodes.setflags(write=False)
    weights.setflags(write=False)
    logger.debug(f"Tensor rule of degree {degree}: {n_polar} x {n_azimuth} nodes")
    return QuadratureRule(nodes=nodes, weights=weights, exactness_degree=degree, source='tensor')


def verify_exactness(rule: QuadratureRule, degree: int, tol: float = EXACTNESS_TOL) -> ExactnessReport:
    """
    Check that the rule integrates every spherical harmonic of degree <= degree.

    The mean of Y_00 = 1 must be 1 and the mean of every other harmonic 0.

    Args:
        rule: Rule to check
        degree: Degree to certify
        tol: Absolute tolerance per harmonic

    Returns:
        ExactnessReport with the worst residual and its (ell, m) witness
    """
    worst = 0.0
    witness = None
    by_degree: Dict[int, float] = {}

    for ell, m, values in iter_real_harmonics(degree, rule.nodes):
        expected = 1.0 if ell == 0 else 0.0
        residual = abs(float(np.dot(rule.weights, values)) - expected)
        by_degree[ell] = max(by_degree.get(ell, 0.0), residual)
        if residual > worst:
            worst = residual
            witness = (ell, m)

    passed = worst <= tol
    if not passed:
        logger.debug(f"Exactness check failed at degree {degree}: residual {worst:.3e} at {witness}")
    return ExactnessReport(passed=passed, degree=degree, worst_residual=worst,
                           witness=witness, residuals_by_degree=by_degree)


def kernel_exactness_residual(rule: QuadratureRule, degree: int) -> float:
    """
    sum_ij w_i w_j sum_{ell<=degree} (2ell+1) P_ell(x_i.x_j) - 1.

    Equals the sum of squared harmonic residuals, so it vanishes exactly when
    the rule is exact to the given degree. Costs O(N^2); meant for small rules.
    """
    weights = np.array([2 * ell + 1 for ell in range(degree + 1)], dtype=float)
    gram = np.clip(rule.nodes @ rule.nodes.T, -1.0, 1.0)
    kernel = gegenbauer_series(2, weights, gram)
    return float(rule.weights @ kernel @ rule.weights - 1.0)


def load_design(path: Union[str, Path], degree: int) -> QuadratureRule:
    """
    Load an equal-weight design file and certify it.

    Args:
        path: Text file, one "x y z" triple per line
        degree: Strength to certify

    Returns:
        QuadratureRule with weights 1/N and exactness_degree = degree

    Raises:
        FileNotFoundError: If the file does not exist
        DesignParseError: For malformed lines or an empty file
        DesignValidationError: For nodes off the unit sphere
        CertificationError: If the exactness check fails
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Design file not found: {path}")

    rows: List[List[float]] = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise DesignParseError(f"expected 3 values, found {len(fields)} in {path}", line_number)
            try:
                rows.append([float(v) for v in fields])
            except ValueError:
                raise DesignParseError(f"non-numeric entry {line.strip()!r} in {path}", line_number)

    if not rows:
        raise DesignParseError(f"design file {path} is empty")

    nodes = np.array(rows)
    norms = np.linalg.norm(nodes, axis=1)
    off_sphere = np.abs(norms - 1.0) > SPHERE_TOL
    if np.any(off_sphere):
        bad = int(np.argmax(off_sphere))
        raise DesignValidationError(
            f"node on line {bad + 1} of {path} has norm {norms[bad]:.12f}, not within {SPHERE_TOL} of 1"
        )
    # nodes already unit to rounding are kept as-is, so save/reload is bit-stable
    stretched = np.abs(norms - 1.0) > RENORMALIZE_TOL
    nodes[stretched] = nodes[stretched] / norms[stretched, None]
    weights = np.full(nodes.shape[0], 1.0 / nodes.shape[0])

    rule = QuadratureRule(nodes=nodes, weights=weights, exactness_degree=degree,
                          source='design-file', path=str(path))
    report = verify_exactness(rule, degree)
    if not report.passed:
        logger.error(f"Design {path} failed certification at degree {degree}")
        raise CertificationError(
            f"{path} is not exact to degree {degree}: residual {report.worst_residual:.3e} "
            f"at (ell, m) = {report.witness}",
            witness=report.witness, residual=report.worst_residual,
        )

    nodes.setflags(write=False)
    weights.setflags(write=False)
    logger.info(f"Loaded design {path.name}: {rule.size} nodes, certified degree {degree}")
    return rule


def save_design(rule: QuadratureRule, path: Union[str, Path]) -> str:
    """Write the rule's nodes as "x y z" lines with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, rule.nodes, fmt='%.17g')
    logger.info(f"Saved {rule.size} nodes to {path}")
    return str(path)


def discover_designs(source: QuadratureSource) -> Dict[int, Path]:
    """
    Map design strength to file for a directory source.

    A manifest (explicit, or manifest.json in the directory) takes precedence
    over filename discovery. Manifest format: [{"strength": t, "path": p}, ...]
    with paths relative to the manifest.
    """
    if source.kind != 'dir' or source.directory is None:
        return {}

    manifest = source.manifest
    if manifest is None and (source.directory / MANIFEST_NAME).exists():
        manifest = source.directory / MANIFEST_NAME

    designs: Dict[int, Path] = {}
    if manifest is not None:
        try:
            with open(manifest, 'r', encoding='utf-8') as f:
                entries = json.load(f)
            for entry in entries:
                path = manifest.parent / entry['path']
                if not path.is_file():
                    raise FileNotFoundError(f"listed design {path} does not exist")
                designs[int(entry['strength'])] = path
        except (OSError, ValueError, KeyError, TypeError) as e:
            logger.error(f"Error reading design manifest {manifest}: {e}")
            raise ConfigurationError(f"Invalid design manifest {manifest}: {e}") from e
        return designs

    if not source.directory.is_dir():
        raise ConfigurationError(f"Design directory not found: {source.directory}")

    for file_path in source.directory.iterdir():
        match = _DESIGN_NAME.match(file_path.name)
        if match and file_path.is_file():
            designs[int(match.group(1))] = file_path
    return designs


def rule_for_degree(degree: int, source: QuadratureSource, fallback: bool = False) -> QuadratureRule:
    """
    Certified rule of exactness >= degree from the given source.

    For a directory source the design of smallest sufficient strength is
    used. With fallback=True a missing design yields a tensor rule instead of
    an error.

    Raises:
        ConfigurationError: If no design of sufficient strength exists
    """
    if source.kind == 'tensor':
        return tensor_rule(degree)

    designs = discover_designs(source)
    candidates = sorted(t for t in designs if t >= degree)
    if not candidates:
        if fallback:
            logger.warning(f"⚠️  No design of strength >= {degree} in {source.directory}; using tensor rule")
            return tensor_rule(degree)
        raise ConfigurationError(f"No design of strength >= {degree} in {source.directory}")

    strength = candidates[0]
    return load_design(designs[strength], strength)


def needlet_quadrature_sequence(J: int, source: QuadratureSource,
                                fallback: bool = False) -> List[QuadratureRule]:
    """
    Needlet quadratures Q_0..Q_J; rule j is exact to degree 2^(j+1) - 1.

    Args:
        J: Needlet order (>= 0)
        source: Where rules come from
        fallback: Use tensor rules for levels without a design

    Returns:
        List of J+1 certified rules

    Raises:
        ConfigurationError: If a level has no suitable design (names the level)
    """
    if J < 0:
        raise DomainError(f"Needlet order must be >= 0, got {J}")

    rules = []
    for j in range(J + 1):
        required = 2 ** (j + 1) - 1
        try:
            rule = rule_for_degree(required, source, fallback=fallback)
        except ConfigurationError as e:
            logger.error(f"Level {j}: {e}")
            raise ConfigurationError(
                f"Level {j} needs a design of strength >= {required}: {e}"
            ) from e
        logger.debug(f"Level {j}: {rule.describe()}")
        rules.append(rule)

    logger.info(f"Needlet quadratures for J={J}: node counts {[r.size for r in rules]}")
    return rules


def discretization_degree(J: int) -> int:
    """Degree 3*2^(J-1) - 1 the discretization rule needs for order J (0 for J = 0)."""
    if J < 0:
        raise DomainError(f"Needlet order must be >= 0, got {J}")
    return 0 if J == 0 else 3 * 2 ** (J - 1) - 1


def discretization_rule(J: int, source: QuadratureSource, extra_degree: int = 0,
                        fallback: bool = False) -> QuadratureRule:
    """Certified discretization rule for order J, optionally of higher degree."""
    if extra_degree < 0:
        raise ConfigurationError("The discretization degree may be raised, never lowered")
    return rule_for_degree(discretization_degree(J) + extra_degree, source, fallback=fallback)
