"""
CSV Writer Module

Writes experiment tables as CSV files. Every file starts with a block of '#'
comment lines echoing the run configuration and the package version so the
table can be reproduced; the body is plain pandas CSV.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd
import yaml

from src import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


class CSVWriter:
    """Write result tables with a reproducibility header."""

    def __init__(self, config: Dict):
        """
        Initialize CSV writer with configuration.

        Args:
            config: Merged run configuration
        """
        self.config = config
        self.output_config = config.get('output', {})
        self.output_dir = Path(self.output_config.get('directory', 'output'))
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def header_lines(self, command: str) -> List[str]:
        """Config echo and version as comment lines."""
        echo = yaml.safe_dump(self.config, sort_keys=True, default_flow_style=False)
        lines = [f"needlets {__version__}", f"command: {command}"]
        lines += [line for line in echo.splitlines() if line.strip()]
        return lines

    def resolve_path(self, filename: str) -> Path:
        path = Path(filename)
        return path if path.is_absolute() or path.parent != Path('.') else self.output_dir / path

    def write_table(
        self,
        table: pd.DataFrame,
        filename: str,
        command: str,
        footer: Optional[Iterable[str]] = None
    ) -> str:
        """
        Write a table as CSV.

        Args:
            table: Rows to write
            filename: Bare name (placed in the output directory) or a path
            command: Command name recorded in the header
            footer: Extra comment lines written after the body

        Returns:
            Path to created CSV file
        """
        path = self.resolve_path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)

        try:
            with open(path, 'w', encoding='utf-8', newline='') as handle:
                for line in self.header_lines(command):
                    handle.write(f"# {line}\n")
                table.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
                for line in footer or []:
                    handle.write(f"# {line}\n")
        except Exception as e:
            logger.error(f"Error writing {path}: {e}")
            raise

        logger.info(f"✅ Wrote {len(table)} rows to {path}")
        return str(path)


def read_table(path: str) -> pd.DataFrame:
    """Read a table written by CSVWriter, skipping comment lines."""
    return pd.read_csv(path, comment='#', float_precision='round_trip')
