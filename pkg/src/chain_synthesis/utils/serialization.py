"""
Text formats of the command line: matrices, plans, tables and schedules.

Every file starts with `# key: value` header lines. Floats are written with
17 significant digits so that a value read back is bit-identical.
"""
import csv
import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .. import __version__
from ..core.error import FileFormatError, InputError
from ..core.schemas import (
    CouplingStep,
    EllipseReport,
    PulseSchedule,
    ScheduleValidation,
    SynthesisPlan,
    TraceRecord,
)
from ..core.symplectic import TOL_SYM, scaled_tolerance, sp2_log
from .logger import get_logger

logger = get_logger()

CONVENTION = "interleaved quadratures (x1,p1,...,xN,pN), vacuum variance 1/2"
PLAN_COLUMNS = ["index", "site", "s00", "s01", "s10", "s11", "alpha", "beta", "gamma"]
ELLIPSE_COLUMNS = ["n", "m", "kind", "semi_major", "semi_minor", "angle"]
NEGATIVITY_COLUMNS = ["n", "m", "log_negativity", "entangled"]
TRACE_COLUMNS = ["step", "site", "pairs", "bound", "stage"]
SCHEDULE_COLUMNS = [
    "step_index",
    "site",
    "segment",
    "mean_strength",
    "modulation_depth",
    "modulation_phase",
    "duration",
]
VALIDATION_COLUMNS = [
    "step_index",
    "site",
    "segments",
    "duration",
    "error",
    "leakage",
    "defect",
    "budget",
    "within_budget",
]


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_hash(path: Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def matrix_hash(M: np.ndarray) -> str:
    """Hash of the shape and the 17-digit row-major entries."""
    M = np.asarray(M, dtype=float)
    text = "x".join(str(size) for size in M.shape) + ":" + ",".join(map(format_float, M.ravel()))
    return sha256_bytes(text.encode("ascii"))


def base_header(**fields: Any) -> Dict[str, Any]:
    header = dict(version=__version__)
    header.update(fields)
    return header


def _header_lines(title: str, header: Dict[str, Any]) -> List[str]:
    lines = [f"# {title}", f"# convention: {CONVENTION}"]
    lines += [f"# {key}: {_cell(value)}" for key, value in header.items()]
    return lines


def _write_table(
    path: Path, title: str, header: Dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as table_file:
        for line in _header_lines(title, header):
            table_file.write(line + "\n")
        writer = csv.writer(table_file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.debug(f"Wrote `{path}`")
    return path


def _read_lines(path: Path) -> List[str]:
    path = Path(path)
    try:
        return path.read_text().splitlines()
    except OSError as error:
        raise InputError("Unable to read input file", path=path, reason=error.strerror)


def _parse_header(lines: List[str]) -> Tuple[Dict[str, str], List[Tuple[int, str]]]:
    header, body = dict(), []
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, separator, value = stripped[1:].partition(":")
            if separator:
                header[key.strip()] = value.strip()
            continue
        body.append((number, stripped))
    return header, body


def _parse_float(text: str, line: Optional[int], field: str, path: Path) -> float:
    try:
        return float(text)
    except ValueError:
        raise FileFormatError(f"Expected a number, got `{text}`", line=line, field=field, path=path)


# Matrices


def write_matrix(path: Path, M: np.ndarray, header: Dict[str, Any], title: str = "matrix") -> Path:
    M = np.asarray(M, dtype=float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as matrix_file:
        for line in _header_lines(title, header):
            matrix_file.write(line + "\n")
        for row in M:
            matrix_file.write(",".join(map(format_float, row)) + "\n")
    logger.debug(f"Wrote `{path}`")
    return path


def read_matrix(path: Path) -> np.ndarray:
    """
    Read a comma-separated square matrix, `#` lines are comments

    Raises:
        FileFormatError: non-numeric field, ragged or non-square data
    """
    _, body = _parse_header(_read_lines(path))
    if not body:
        raise FileFormatError("No matrix rows found", path=path)
    rows = []
    for number, text in body:
        fields = text.split(",")
        if rows and len(fields) != len(rows[0]):
            raise FileFormatError(
                f"Expected {len(rows[0])} fields, got {len(fields)}", line=number, path=path
            )
        rows.append([_parse_float(field, number, f"column {k}", path) for k, field in enumerate(fields, 1)])
    M = np.array(rows)
    if M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise FileFormatError("Matrix must be square with even dimension", shape=M.shape, path=path)
    return M


# Plans


def write_plan(path: Path, plan: SynthesisPlan, header: Optional[Dict[str, Any]] = None) -> Path:
    fields = dict(header or dict())
    fields.update(
        chain_length=plan.chain_length,
        seed=plan.seed,
        variant=plan.variant,
        steps=len(plan.steps),
        residual=plan.residual,
        target_hash=matrix_hash(plan.target),
        stage_boundaries=" ".join(map(str, plan.stage_boundaries)),
        stage_modes=" ".join(map(str, plan.stage_modes)),
        target=" ".join(map(format_float, plan.target.ravel())),
    )
    rows = []
    for index, step in enumerate(plan.steps, start=1):
        logarithm = sp2_log(step.inner, scaled_tolerance(TOL_SYM, step.inner))
        exponent = logarithm.factors[0] if logarithm.is_single else (None, None, None)
        rows.append([index, step.site, *step.inner.ravel(), *exponent])
    return _write_table(path, "chain-synthesis plan", base_header(**fields), PLAN_COLUMNS, rows)


def _header_value(header: Dict[str, str], key: str, path: Path) -> str:
    if key not in header:
        raise FileFormatError(f"Missing header field `{key}`", field=key, path=path)
    return header[key]


def _header_ints(header: Dict[str, str], key: str, path: Path) -> List[int]:
    try:
        return [int(value) for value in header.get(key, "").split()]
    except ValueError:
        raise FileFormatError("Expected integers", field=key, path=path)


def read_plan(path: Path) -> SynthesisPlan:
    """
    Read a plan written by `write_plan`

    Raises:
        FileFormatError: missing header fields, malformed records, non-symplectic
            inner matrices or a target that does not match its hash
    """
    header, body = _parse_header(_read_lines(path))
    try:
        chain_length = int(_header_value(header, "chain_length", path))
        seed = int(header.get("seed", "0"))
    except ValueError:
        raise FileFormatError("chain_length and seed must be integers", path=path)
    size = 2 * (chain_length - 1)
    target_fields = _header_value(header, "target", path).split()
    if chain_length < 2 or len(target_fields) != size * size:
        raise FileFormatError(
            f"Target must hold {size * size} entries", field="target", entries=len(target_fields), path=path
        )
    target = np.array([_parse_float(value, None, "target", path) for value in target_fields]).reshape(size, size)
    if "target_hash" in header and header["target_hash"] != matrix_hash(target):
        raise FileFormatError("Target does not match its hash", field="target_hash", path=path)

    steps = []
    for number, text in body:
        fields = text.split(",")
        if fields == PLAN_COLUMNS:
            continue
        if len(fields) != len(PLAN_COLUMNS):
            raise FileFormatError(
                f"Expected {len(PLAN_COLUMNS)} fields, got {len(fields)}", line=number, path=path
            )
        try:
            site = int(fields[1])
        except ValueError:
            raise FileFormatError("Site must be an integer", line=number, field="site", path=path)
        inner = [_parse_float(fields[k], number, PLAN_COLUMNS[k], path) for k in range(2, 6)]
        try:
            steps.append(CouplingStep(site=site, inner=np.reshape(inner, (2, 2))))
        except (ValidationError, InputError) as error:
            raise FileFormatError("Invalid coupling step", line=number, field="inner", reason=str(error).splitlines()[0], path=path)

    try:
        return SynthesisPlan(
            chain_length=chain_length,
            steps=steps,
            target=target,
            seed=seed,
            variant=header.get("variant", "row"),
            stage_boundaries=_header_ints(header, "stage_boundaries", path),
            stage_modes=_header_ints(header, "stage_modes", path),
        )
    except ValidationError as error:
        raise FileFormatError("Invalid plan", reason=str(error).splitlines()[-1], path=path)


# Tables


def write_ellipses(path: Path, reports: Iterable[EllipseReport], header: Dict[str, Any]) -> Path:
    rows = (
        [report.pair[0], report.pair[1], report.kind, report.semi_major, report.semi_minor, report.angle]
        for report in reports
    )
    return _write_table(path, "chain-synthesis ellipses", base_header(**header), ELLIPSE_COLUMNS, rows)


def write_negativity(path: Path, table: np.ndarray, threshold: float, header: Dict[str, Any]) -> Path:
    N = table.shape[0]
    rows = (
        [n, m, table[n - 1, m - 1], int(table[n - 1, m - 1] > threshold)]
        for n in range(1, N + 1)
        for m in range(n + 1, N + 1)
    )
    fields = dict(header, threshold=threshold)
    return _write_table(path, "chain-synthesis negativity", base_header(**fields), NEGATIVITY_COLUMNS, rows)


def write_trace(path: Path, records: Iterable[TraceRecord], header: Dict[str, Any]) -> Path:
    rows = ([record.step, record.site, record.pair_count, record.bound, record.stage] for record in records)
    return _write_table(path, "chain-synthesis entanglement trace", base_header(**header), TRACE_COLUMNS, rows)


def write_schedules(path: Path, schedules: Iterable[PulseSchedule], header: Dict[str, Any]) -> Path:
    rows = (
        [
            schedule.step_index,
            segment.site,
            number,
            segment.mean_strength,
            segment.modulation_depth,
            segment.modulation_phase,
            segment.duration,
        ]
        for schedule in schedules
        for number, segment in enumerate(schedule.segments, start=1)
    )
    return _write_table(path, "chain-synthesis pulse schedules", base_header(**header), SCHEDULE_COLUMNS, rows)


def write_validation(
    path: Path,
    results: Iterable[Tuple[PulseSchedule, ScheduleValidation]],
    budget: float,
    header: Dict[str, Any],
) -> Path:
    rows = (
        [
            schedule.step_index,
            schedule.target_step.site,
            len(schedule.segments),
            schedule.total_duration,
            validation.error,
            validation.leakage,
            validation.defect,
            budget,
            int(validation.total <= budget),
        ]
        for schedule, validation in results
    )
    return _write_table(path, "chain-synthesis pulse validation", base_header(**header), VALIDATION_COLUMNS, rows)
