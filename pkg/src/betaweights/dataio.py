"""Survey CSV ingestion, run configuration, and the small text formats.

The survey format: a header row naming k attribute columns (conventionally
q1..qk) plus `overall` (the response) and `period` (1 or 2); cells hold the
11-level ordinal scores either as levels 0-10 or as percentages 0-100 in
steps of 10. A file is read as percentages exactly when any score cell
exceeds 10. Lines starting with '#' are ignored, which lets result files
embed provenance comments and still parse.

Config and truth files are flat `key = value` text; '#' comments allowed.
"""

import csv
import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidInputError, ParseError, SchemaError
from .model import Dataset
from .sampler import SamplerConfig
from .synth import Truth

RESPONSE_COLUMN = "overall"
PERIOD_COLUMN = "period"

MODEL_KINDS = ("joint", "separated")
SCALE_MAPPINGS = ("endpoint", "midpoint")
BOUNDARY_POLICIES = ("drop", "clamp")


def fmt(x) -> str:
    """Canonical float formatting for all emitted files (12 significant digits)."""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


@dataclass(frozen=True)
class IngestionReport:
    """What happened while loading a survey CSV."""

    attribute_columns: tuple
    n_rows_read: int
    n_rows_kept: int
    dropped_rows: tuple  # 1-based data-row indices whose response hit 0 or 1
    clamped_rows: tuple
    scale_detected: str  # "levels" or "percent"
    scale_mapping: str
    boundary_policy: str


def _level_from_cell(text: str, row: int, col: str, percent: bool) -> int:
    s = text.strip()
    try:
        value = int(s)
    except ValueError:
        raise ParseError(
            f"row {row}, column {col!r}: expected an integer score, got {text!r}"
        ) from None
    if percent:
        if value < 0 or value > 100 or value % 10 != 0:
            raise ParseError(
                f"row {row}, column {col!r}: percentage scores must be "
                f"0-100 in steps of 10, got {value}"
            )
        return value // 10
    if value < 0 or value > 10:
        raise ParseError(
            f"row {row}, column {col!r}: level scores must be 0-10, got {value}"
        )
    return value


def _map_level(level: int, scale_mapping: str) -> float:
    if scale_mapping == "endpoint":
        return level / 10.0
    return min((level + 0.5) / 11.0, 1.0)


def load_survey_csv(path, scale_mapping: str = "endpoint",
                    boundary_policy: str = "drop",
                    clamp_epsilon: float = 0.01):
    """Read a survey CSV into a Dataset. Returns (dataset, report).

    Endpoint mapping sends level l to l/10; midpoint to (l+0.5)/11. Rows
    whose mapped response is exactly 0 or 1 are dropped (default) or moved
    to epsilon / 1 - epsilon. Attribute scores at 0 or 1 are kept as they
    are; only the response is boundary-checked.
    """
    if scale_mapping not in SCALE_MAPPINGS:
        raise InvalidInputError(f"unknown scale_mapping {scale_mapping!r}")
    if boundary_policy not in BOUNDARY_POLICIES:
        raise InvalidInputError(f"unknown boundary_policy {boundary_policy!r}")
    if boundary_policy == "clamp" and not 0.0 < clamp_epsilon <= 0.05:
        raise InvalidInputError("clamp epsilon must lie in (0, 0.05]")

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: file has no header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    for required in (RESPONSE_COLUMN, PERIOD_COLUMN):
        if required not in header:
            raise SchemaError(f"{path}: missing required column {required!r}")
    attr_cols = [h for h in header if h not in (RESPONSE_COLUMN, PERIOD_COLUMN)]
    if not attr_cols:
        raise SchemaError(f"{path}: no attribute columns besides "
                          f"{RESPONSE_COLUMN!r} and {PERIOD_COLUMN!r}")
    col_index = {h: i for i, h in enumerate(header)}
    body = rows[1:]
    if not body:
        raise InvalidInputError(f"{path}: no data rows")

    # file-level scale detection: percentages iff any score cell exceeds 10
    percent = False
    score_cols = attr_cols + [RESPONSE_COLUMN]
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(
                f"row {r}: expected {len(header)} cells, got {len(row)}"
            )
        for col in score_cols:
            s = row[col_index[col]].strip()
            try:
                if int(s) > 10:
                    percent = True
            except ValueError:
                raise ParseError(
                    f"row {r}, column {col!r}: expected an integer score, got {s!r}"
                ) from None

    xs, ys, periods = [], [], []
    dropped, clamped = [], []
    for r, row in enumerate(body, start=1):
        x_row = [
            _map_level(_level_from_cell(row[col_index[c]], r, c, percent),
                       scale_mapping)
            for c in attr_cols
        ]
        y = _map_level(
            _level_from_cell(row[col_index[RESPONSE_COLUMN]], r,
                             RESPONSE_COLUMN, percent),
            scale_mapping,
        )
        p = row[col_index[PERIOD_COLUMN]].strip()
        if p not in ("1", "2"):
            raise ParseError(
                f"row {r}, column {PERIOD_COLUMN!r}: period must be 1 or 2, got {p!r}"
            )
        if y <= 0.0 or y >= 1.0:
            if boundary_policy == "drop":
                dropped.append(r)
                continue
            y = clamp_epsilon if y <= 0.0 else 1.0 - clamp_epsilon
            clamped.append(r)
        xs.append(x_row)
        ys.append(y)
        periods.append(int(p))

    if not xs:
        raise InvalidInputError(
            f"{path}: all {len(body)} rows were dropped as boundary responses"
        )
    data = Dataset(x=np.array(xs), y=np.array(ys), period=np.array(periods))
    report = IngestionReport(
        attribute_columns=tuple(attr_cols),
        n_rows_read=len(body),
        n_rows_kept=len(xs),
        dropped_rows=tuple(dropped),
        clamped_rows=tuple(clamped),
        scale_detected="percent" if percent else "levels",
        scale_mapping=scale_mapping,
        boundary_policy=boundary_policy,
    )
    return data, report


def _as_level(value: float, what: str) -> int:
    scaled = value * 10.0
    level = int(round(scaled))
    if abs(scaled - level) > 1e-9 or not 0 <= level <= 10:
        raise InvalidInputError(
            f"{what} = {value!r} is not on the 11-level grid {{0, 0.1, ..., 1}}"
        )
    return level


def write_level_csv(path, attribute_names, x_levels, y_levels, period,
                    comment: str | None = None):
    """Write integer level scores (0-10) in the survey format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(list(attribute_names) + [RESPONSE_COLUMN, PERIOD_COLUMN])
        for i in range(len(y_levels)):
            writer.writerow(
                [str(int(v)) for v in x_levels[i]]
                + [str(int(y_levels[i])), str(int(period[i]))]
            )


def save_survey_csv(data: Dataset, path, comment: str | None = None):
    """Write a Dataset whose values sit on the 11-level endpoint grid.

    Values off the grid cannot be represented in the survey format and
    raise an invalid-input error. Reloading with endpoint mapping recovers
    the matrix exactly.
    """
    x_levels = np.empty_like(data.x, dtype=int)
    for i in range(data.n):
        for j in range(data.k):
            x_levels[i, j] = _as_level(data.x[i, j], f"x[{i},{j}]")
    y_levels = np.array([_as_level(v, f"y[{i}]") for i, v in enumerate(data.y)])
    names = [f"q{j + 1}" for j in range(data.k)]
    write_level_csv(path, names, x_levels, y_levels, data.period, comment)


def read_key_value_file(path) -> dict:
    """Parse a flat `key = value` text file; '#' comments and blanks skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{ln}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ParseError(f"{path}:{ln}: empty key")
            if key in out:
                raise ParseError(f"{path}:{ln}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    """Everything one fit/compare run needs; mirrors the config-file keys."""

    input_path: str
    output_dir: str
    model_kind: str = "joint"
    iterations: int = 3000
    burnin: int = 1000
    thin: int = 1
    seed: int = 0
    scale_mapping: str = "endpoint"
    boundary_policy: str = "drop"
    clamp_epsilon: float = 0.01
    emit_plots: bool = False

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise InvalidInputError(f"model_kind must be one of {MODEL_KINDS}")
        if self.scale_mapping not in SCALE_MAPPINGS:
            raise InvalidInputError(f"scale_mapping must be one of {SCALE_MAPPINGS}")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise InvalidInputError(
                f"boundary_policy must be one of {BOUNDARY_POLICIES}"
            )
        if self.boundary_policy == "clamp" and not 0.0 < self.clamp_epsilon <= 0.05:
            raise InvalidInputError("clamp_epsilon must lie in (0, 0.05]")
        self.sampler_config()  # validates the run-length fields

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            iterations=self.iterations,
            burnin=self.burnin,
            thin=self.thin,
            seed=self.seed,
        )

    def to_lines(self) -> list:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = fmt(value)
            lines.append(f"{f.name} = {text}")
        return lines

    def config_hash(self) -> str:
        blob = "\n".join(self.to_lines()).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


_CONFIG_INT = ("iterations", "burnin", "thin", "seed")
_CONFIG_FLOAT = ("clamp_epsilon",)
_CONFIG_BOOL = ("emit_plots",)
_CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ParseError(f"{key}: expected a boolean, got {value!r}")


def config_from_mapping(mapping: dict) -> RunConfig:
    """Build a RunConfig from string key/value pairs (file and/or CLI)."""
    unknown = sorted(set(mapping) - set(_CONFIG_KEYS))
    if unknown:
        raise ParseError(f"unknown config keys: {', '.join(unknown)}")
    for required in ("input_path", "output_dir"):
        if required not in mapping:
            raise ParseError(f"missing required config key {required!r}")
    kwargs = {}
    for key, value in mapping.items():
        try:
            if key in _CONFIG_INT:
                kwargs[key] = int(value)
            elif key in _CONFIG_FLOAT:
                kwargs[key] = float(value)
            elif key in _CONFIG_BOOL:
                kwargs[key] = _parse_bool(value, key)
            else:
                kwargs[key] = value
        except ValueError:
            raise ParseError(f"{key}: cannot parse {value!r}") from None
    return RunConfig(**kwargs)


_TRUTH_KEYS = ("k", "n_per_group", "sigma2", "weights", "x_law")


def load_truth_file(path) -> Truth:
    """Read generating parameters for cmd_simulate from a key/value file."""
    kv = read_key_value_file(path)
    unknown = sorted(set(kv) - set(_TRUTH_KEYS))
    if unknown:
        raise ParseError(f"{path}: unknown truth keys: {', '.join(unknown)}")
    for required in ("k", "n_per_group", "sigma2", "weights"):
        if required not in kv:
            raise ParseError(f"{path}: missing truth key {required!r}")
    try:
        weights = tuple(float(s) for s in kv["weights"].split(","))
        truth = Truth(
            weights=weights,
            sigma2=float(kv["sigma2"]),
            n_per_group=int(kv["n_per_group"]),
            k=int(kv["k"]),
            x_law=kv.get("x_law", "grid11"),
        )
    except ValueError:
        raise ParseError(f"{path}: malformed numeric value in truth file") from None
    return truth
