"""
Shared helpers
--------------
Logging setup and atomic file output used by every command.
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple

from .errors import InputFormatError


def setup_logging(level: str = "INFO") -> None:
    """Configure logging format and level."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


def atomic_write_text(path: Path, content: str) -> Path:
    """Write text next to its destination, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def to_jsonl(data: Iterable[Dict[str, Any]]) -> str:
    """Convert dicts to a JSONL string."""
    lines = [json.dumps(item, ensure_ascii=False) for item in data]
    return "\n".join(lines) + "\n" if lines else ""


def write_jsonl(data: List[Dict[str, Any]], output_path: Path) -> None:
    """Write a list of dicts to a JSONL file atomically."""
    atomic_write_text(output_path, to_jsonl(data))
    logging.debug(f"Saved {output_path} ({len(data)} items)")


def iter_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """Yield (1-based line number, line without its newline) for a UTF-8 file.

    CRLF endings are tolerated.

    Raises:
        InputFormatError: if the file is missing or not valid UTF-8.
    """
    path = Path(path)
    line_no = 0
    try:
        with open(path, "r", encoding="utf-8", newline=None) as f:
            for line_no, line in enumerate(f, start=1):
                yield line_no, line.rstrip("\r\n")
    except FileNotFoundError:
        raise InputFormatError(f"file not found: {path}") from None
    except UnicodeDecodeError:
        raise InputFormatError(
            f"{path.name}: invalid UTF-8 near line {line_no + 1}"
        ) from None
