"""
Report writers for the attack toolkit.
"""
import json
from pathlib import Path
from typing import IO, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class ReportService:
    """Service class for JSON-lines, CSV and plain-text reports."""

    @staticmethod
    def to_json_line(record: Dict) -> str:
        return json.dumps(record, default=_plain, sort_keys=True)

    @staticmethod
    def write_jsonl(records: Iterable[Dict], target: Union[Path, IO[str]]) -> int:
        """Write one JSON object per line; returns the number of lines."""
        count = 0
        if isinstance(target, (str, Path)):
            path = Path(target)
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open('w', encoding='utf-8') as handle:
                return ReportService.write_jsonl(records, handle)
        for record in records:
            target.write(ReportService.to_json_line(record) + '\n')
            count += 1
        return count

    @staticmethod
    def read_jsonl(path: Path) -> List[Dict]:
        with Path(path).open(encoding='utf-8') as handle:
            return [json.loads(line) for line in handle if line.strip()]

    @staticmethod
    def write_csv(rows: Sequence[Dict], target: Union[Path, IO[str]],
                  columns: Optional[Sequence[str]] = None) -> None:
        frame = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
        if isinstance(target, (str, Path)):
            Path(target).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False)

    @staticmethod
    def format_table(rows: Sequence[Dict], columns: Optional[Sequence[str]] = None) -> str:
        """Human-readable fixed-width table."""
        if not rows:
            return '(no rows)'
        frame = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
        return frame.to_string(index=False, float_format=lambda value: f"{value:.3f}")
