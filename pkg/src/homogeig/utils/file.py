"""File-related utility functions.

Every CSV, JSON and SVG artifact is written through this module so that
outputs are byte-identical for identical inputs.
"""
import csv
import io
import json
import logging
import os
import threading
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

logger = logging.getLogger(__name__)

OUTPUT_ENV = "HOMOGEIG_OUT"

_write_lock = threading.Lock()


def resolve_output_dir(cli_value: Optional[Union[str, Path]], config_value: Union[str, Path] = "out") -> Path:
    """
    Pick the output root: HOMOGEIG_OUT, then --out, then the run-config.

    Args:
        cli_value: Value of --out, if given
        config_value: output.dir from the run-config

    Returns:
        The output root
    """
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    if cli_value:
        return Path(cli_value)
    return Path(config_value)


def run_directory(output_dir: Union[str, Path], experiment: str, config_hash: str) -> Path:
    """Cache directory of one run-config: <output_dir>/<experiment>-<hash12>."""
    return Path(output_dir) / f"{experiment}-{config_hash[:12]}"


def get_output_path(output_dir: Union[str, Path], filename: str) -> Path:
    """
    Get the full path to save the output file.

    Args:
        output_dir: Directory to save the artifact
        filename: Name of the output file

    Returns:
        Full path to the output file
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir / filename


def write_text(path: Union[str, Path], content: str) -> Path:
    path = Path(path)
    with _write_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
    logger.info("wrote %s", path)
    return path


def dumps_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path: Union[str, Path], data: Any) -> Path:
    return write_text(path, dumps_json(data))


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows under a fixed header with '\\n' line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return write_text(path, buffer.getvalue())
