"""Dataset ingestion, cleaning, temporal splits and tapped-delay views.

Two public archives are supported natively (the roadside metal-oxide array
with hourly averages and reference gas concentrations, and the laboratory
16-sensor dynamic gas-mixture recordings), plus a generic schema-driven CSV
loader for any other deployment with the same shape (e.g. electrochemical
node streams paired with a reference station).

Missing values are represented as NaN internally; the boolean missing mask is
derived from that convention and stored on the dataset.  Masked entries never
enter statistics or training pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import pandas as pd

from sensorcal.errors import DataError, ParseError

ENEA_SENTINEL = -200.0

ENEA_TARGET_COLUMNS = {
    "CO": ("CO(GT)", "mg/m^3"),
    "NMHC": ("NMHC(GT)", "ug/m^3"),
    "C6H6": ("C6H6(GT)", "ug/m^3"),
    "NOx": ("NOx(GT)", "ppb"),
    "NO2": ("NO2(GT)", "ug/m^3"),
}

ENEA_CHANNEL_COLUMNS = [
    "PT08.S1(CO)",
    "PT08.S2(NMHC)",
    "PT08.S3(NOx)",
    "PT08.S4(NO2)",
    "PT08.S5(O3)",
    "T",
    "RH",
    "AH",
]

UCSD_MIXTURES = ("ethylene_co", "ethylene_methane")
UCSD_RAW_COLUMNS = 19  # time + two set-point concentrations + 16 sensors
UCSD_BLOCK = 100  # raw 100 Hz samples averaged into one 1 s sample


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Timestamp-aligned sensor channels and reference target concentrations.

    channels is a [T, d] float matrix, targets maps pollutant name to a [T]
    vector.  missing_mask is [T, d + n_targets] (channels first, then targets
    in dict order) with True marking a missing entry.
    """

    name: str
    sampling_period: float
    channel_names: list
    channels: np.ndarray
    targets: dict
    target_units: dict
    channel_unit: str = ""
    start_index: int = 0
    missing_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        channels = np.ascontiguousarray(self.channels, dtype=float)
        if channels.ndim != 2:
            raise DataError("channels must be a [T, d] matrix")
        t = channels.shape[0]
        if channels.shape[1] != len(self.channel_names):
            raise DataError("channel_names length does not match channel count")
        targets = {}
        masks = [np.isnan(channels)]
        for key, vec in self.targets.items():
            vec = np.ascontiguousarray(vec, dtype=float)
            if vec.shape != (t,):
                raise DataError(
                    f"target {key!r} has length {vec.shape}, expected ({t},)"
                )
            vec.flags.writeable = False
            targets[key] = vec
            masks.append(np.isnan(vec)[:, None])
        if self.sampling_period <= 0:
            raise DataError("sampling_period must be positive")
        channels.flags.writeable = False
        mask = np.hstack(masks) if masks else np.zeros((t, 0), dtype=bool)
        mask.flags.writeable = False
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "missing_mask", mask)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[0]

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]

    @property
    def target_names(self) -> list:
        return list(self.targets.keys())

    def channel_mask(self) -> np.ndarray:
        return self.missing_mask[:, : self.n_channels]

    def target_mask(self, target: str) -> np.ndarray:
        names = self.target_names
        if target not in names:
            raise DataError(f"unknown target {target!r}; have {names}")
        return self.missing_mask[:, self.n_channels + names.index(target)]

    def target_range(self, target: str) -> float:
        """Observed min-to-max span of a target over the whole series."""
        y = self.targets[target]
        good = y[~np.isnan(y)]
        if good.size == 0:
            raise DataError(f"target {target!r} is entirely missing")
        return float(good.max() - good.min())

    def slice(self, start: int, stop: int, name_suffix: str = "") -> "TimeSeriesDataset":
        return TimeSeriesDataset(
            name=self.name + name_suffix,
            sampling_period=self.sampling_period,
            channel_names=list(self.channel_names),
            channels=self.channels[start:stop].copy(),
            targets={k: v[start:stop].copy() for k, v in self.targets.items()},
            target_units=dict(self.target_units),
            channel_unit=self.channel_unit,
            start_index=self.start_index + start,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous train/validation/test lengths, in time order."""

    train_len: int
    val_len: int
    test_len: int

    def __post_init__(self):
        for nm in ("train_len", "val_len", "test_len"):
            v = getattr(self, nm)
            if v < 0 or v != int(v):
                raise DataError(f"{nm} must be a nonnegative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.train_len + self.val_len + self.test_len

    def key(self) -> str:
        return f"{self.train_len}-{self.val_len}-{self.test_len}"


@dataclass(frozen=True)
class TappedDelayConfig:
    """Length of the moving window of past sensor responses, in samples."""

    taps: int

    def __post_init__(self):
        if self.taps < 1:
            raise DataError("taps must be >= 1")

    def window_duration(self, sampling_period: float) -> float:
        return self.taps * sampling_period

    @classmethod
    def from_duration(cls, seconds: float, sampling_period: float) -> "TappedDelayConfig":
        taps = seconds / sampling_period
        rounded = round(taps)
        if rounded < 1 or abs(taps - rounded) > 1e-6:
            raise DataError(
                f"window of {seconds} s is not a whole number of {sampling_period} s samples"
            )
        return cls(taps=rounded)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature z-score parameters estimated on the training segment.

    Zero-variance features are dropped (kept holds the surviving column
    indices) and reported in dropped.  Uses the population convention
    (ddof=0) for the standard deviation.
    """

    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray
    dropped: list

    @property
    def n_features(self) -> int:
        return int(self.kept.size)


@dataclass(frozen=True)
class TappedDelayView:
    """Windowed feature matrix pairing each step with its recent trajectory.

    Row k holds the sensor vectors at times t-L+1 ... t concatenated in time
    order, where t = times[k] (index into the source segment); target[k] is
    the concentration at time t.  Rows whose window touches a missing sensor
    value, or whose target is missing, are excluded and counted.
    """

    features: np.ndarray
    target: np.ndarray
    times: np.ndarray
    taps: int
    n_excluded: int

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class GenericSchema:
    """Column-role map for the generic CSV loader.

    roles assigns every file column to one of: timestamp, sensor, target,
    ignore.  missing_sentinel (if given) is converted to a masked entry.
    """

    roles: Mapping[str, str]
    sampling_period: float
    missing_sentinel: Optional[float] = None
    target_units: Mapping[str, str] = field(default_factory=dict)
    channel_unit: str = ""
    name: str = "generic"

    VALID_ROLES = ("timestamp", "sensor", "target", "ignore")

    def __post_init__(self):
        for col, role in self.roles.items():
            if role not in self.VALID_ROLES:
                raise DataError(f"column {col!r}: unknown role {role!r}")
        if self.sampling_period <= 0:
            raise DataError("sampling_period must be positive")


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


def _sniff_delimiter(path) -> str:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        head = fh.readline()
    if head.count(";") >= 2:
        return ";"
    if head.count(",") >= 2:
        return ","
    return r"\s+"


def _first_bad_line(series: pd.Series, converted: pd.Series, header_lines: int) -> int:
    """1-based file line of the first cell that failed numeric conversion."""
    bad = converted.isna() & series.notna() & (series.astype(str).str.strip() != "")
    idx = int(np.flatnonzero(bad.to_numpy())[0])
    return idx + header_lines + 1


def _to_numeric_strict(frame: pd.DataFrame, columns, decimal: str, header_lines: int) -> pd.DataFrame:
    out = {}
    for col in columns:
        raw = frame[col]
        if raw.dtype.kind in "fi":
            out[col] = raw.astype(float)
            continue
        cleaned = raw.astype(str).str.strip()
        if decimal == ",":
            cleaned = cleaned.str.replace(",", ".", regex=False)
        converted = pd.to_numeric(cleaned.replace("", np.nan), errors="coerce")
        if (converted.isna() & cleaned.notna() & (cleaned != "") & (cleaned.str.lower() != "nan")).any():
            line = _first_bad_line(cleaned, converted, header_lines)
            raise ParseError(f"column {col!r}: unparseable numeric value", line=line)
        out[col] = converted.astype(float)
    return pd.DataFrame(out)


def _check_uniform_times(seconds: np.ndarray, period: float, context: str) -> None:
    diffs = np.diff(seconds)
    if np.any(diffs <= 0):
        row = int(np.flatnonzero(diffs <= 0)[0]) + 2
        raise DataError(f"{context}: timestamps not strictly increasing at row {row}")
    if np.any(np.abs(diffs - period) > 1e-6 * max(period, 1.0)):
        row = int(np.flatnonzero(np.abs(diffs - period) > 1e-6 * max(period, 1.0))[0]) + 2
        raise DataError(
            f"{context}: spacing at row {row} is {diffs[row - 2]} s, expected {period} s"
        )


def load_enea_pirelli(path) -> TimeSeriesDataset:
    """Load the public roadside multisensor archive (hourly averages).

    Expects the published layout: date/time columns, five reference gas
    columns (CO, NMHC, benzene, NOx, NO2), five metal-oxide sensor columns
    PT08.S1-S5 (ohms), temperature, relative and absolute humidity.  The
    sentinel -200 marks missing entries.
    """
    sep = _sniff_delimiter(path)
    decimal = "," if sep == ";" else "."
    try:
        frame = pd.read_csv(path, sep=sep, engine="python", dtype=str, skipinitialspace=True)
    except Exception as exc:  # pandas raises several parser error types
        raise ParseError(f"{path}: {exc}") from exc
    frame = frame.loc[:, [c for c in frame.columns if not c.startswith("Unnamed")]]
    # the public file ends with fully empty rows; drop them but nothing else
    frame = frame.dropna(how="all")
    expected = ["Date", "Time"] + [c for c, _ in ENEA_TARGET_COLUMNS.values()] + ENEA_CHANNEL_COLUMNS
    missing_cols = [c for c in expected if c not in frame.columns]
    if missing_cols:
        raise DataError(f"{path}: missing expected columns {missing_cols}")

    try:
        stamps = pd.to_datetime(
            frame["Date"].str.strip() + " " + frame["Time"].str.strip(),
            format="%d/%m/%Y %H.%M.%S",
        )
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: bad date/time field ({exc})") from exc
    seconds = stamps.astype("int64").to_numpy() / 1e9
    _check_uniform_times(seconds, 3600.0, path)

    value_cols = [c for c, _ in ENEA_TARGET_COLUMNS.values()] + ENEA_CHANNEL_COLUMNS
    values = _to_numeric_strict(frame, value_cols, decimal, header_lines=1)
    values = values.mask(values == ENEA_SENTINEL)

    channels = values[ENEA_CHANNEL_COLUMNS].to_numpy(dtype=float)
    targets = {
        key: values[col].to_numpy(dtype=float)
        for key, (col, _unit) in ENEA_TARGET_COLUMNS.items()
    }
    return TimeSeriesDataset(
        name="enea_pirelli",
        sampling_period=3600.0,
        channel_names=list(ENEA_CHANNEL_COLUMNS),
        channels=channels,
        targets=targets,
        target_units={k: u for k, (_c, u) in ENEA_TARGET_COLUMNS.items()},
        channel_unit="ohm",
    )


def load_ucsd_mixtures(path, mixture: str) -> TimeSeriesDataset:
    """Load a laboratory dynamic gas-mixture recording and average it to 1 s.

    The raw file holds ~100 Hz rows: time, two gas set-point concentration
    columns and 16 sensor conductivity columns.  Non-overlapping blocks of
    100 raw samples are averaged into one 1 s sample; a trailing partial
    block is dropped.
    """
    if mixture not in UCSD_MIXTURES:
        raise DataError(f"unknown mixture {mixture!r}; expected one of {UCSD_MIXTURES}")
    sep = _sniff_delimiter(path)
    try:
        frame = pd.read_csv(
            path, sep=sep, engine="python", comment=None, header=None, skiprows=_count_header_lines(path)
        )
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if frame.shape[1] != UCSD_RAW_COLUMNS:
        raise DataError(
            f"{path}: expected {UCSD_RAW_COLUMNS} columns (time, 2 concentrations, 16 sensors), got {frame.shape[1]}"
        )
    raw = frame.to_numpy(dtype=float)
    times = raw[:, 0]
    if np.any(np.diff(times) <= 0):
        row = int(np.flatnonzero(np.diff(times) <= 0)[0]) + 2
        raise DataError(f"{path}: time column not strictly increasing at row {row}")

    n_blocks = raw.shape[0] // UCSD_BLOCK
    if n_blocks == 0:
        raise DataError(f"{path}: fewer than {UCSD_BLOCK} raw samples")
    blocks = raw[: n_blocks * UCSD_BLOCK].reshape(n_blocks, UCSD_BLOCK, raw.shape[1])
    averaged = blocks.mean(axis=1)

    if mixture == "ethylene_co":
        gas_names = [("CO", "ppm"), ("ethylene", "ppm")]
    else:
        gas_names = [("methane", "ppm"), ("ethylene", "ppm")]
    targets = {name: averaged[:, 1 + i] for i, (name, _u) in enumerate(gas_names)}
    channels = averaged[:, 3:]
    return TimeSeriesDataset(
        name=f"ucsd_{mixture}",
        sampling_period=1.0,
        channel_names=[f"S{i + 1:02d}" for i in range(channels.shape[1])],
        channels=channels,
        targets=targets,
        target_units={name: unit for name, unit in gas_names},
        channel_unit="conductivity",
    )


def _count_header_lines(path) -> int:
    """Number of leading lines that do not start with a numeric token."""
    count = 0
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            tok = line.replace(",", " ").split()
            if not tok:
                count += 1
                continue
            try:
                float(tok[0])
                break
            except ValueError:
                count += 1
    return count


def load_generic_csv(path, schema: GenericSchema) -> TimeSeriesDataset:
    """Load any CSV whose columns are described by a GenericSchema.

    Rows with a missing target are retained on the time axis but masked.
    """
    sep = _sniff_delimiter(path)
    try:
        frame = pd.read_csv(path, sep=sep, engine="python", dtype=str, skipinitialspace=True)
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    frame = frame.dropna(how="all")

    file_cols = list(frame.columns)
    schema_cols = list(schema.roles.keys())
    unmatched_schema = [c for c in schema_cols if c not in file_cols]
    unmatched_file = [c for c in file_cols if c not in schema_cols]
    if unmatched_schema or unmatched_file:
        raise DataError(
            f"{path}: schema/column mismatch (schema-only: {unmatched_schema}, file-only: {unmatched_file})"
        )

    time_cols = [c for c, r in schema.roles.items() if r == "timestamp"]
    sensor_cols = [c for c in file_cols if schema.roles[c] == "sensor"]
    target_cols = [c for c in file_cols if schema.roles[c] == "target"]
    if not sensor_cols:
        raise DataError(f"{path}: schema declares no sensor columns")
    if not target_cols:
        raise DataError(f"{path}: schema declares no target columns")

    if time_cols:
        if len(time_cols) > 1:
            raise DataError(f"{path}: more than one timestamp column: {time_cols}")
        raw_t = frame[time_cols[0]].astype(str).str.strip()
        numeric_t = pd.to_numeric(raw_t, errors="coerce")
        if numeric_t.notna().all():
            seconds = numeric_t.to_numpy(dtype=float)
        else:
            try:
                seconds = pd.to_datetime(raw_t).astype("int64").to_numpy() / 1e9
            except (ValueError, TypeError) as exc:
                raise ParseError(f"{path}: unparseable timestamps ({exc})") from exc
        if pd.Series(seconds).duplicated().any():
            row = int(np.flatnonzero(pd.Series(seconds).duplicated().to_numpy())[0]) + 2
            raise DataError(f"{path}: duplicate timestamp at row {row}")
        _check_uniform_times(seconds, schema.sampling_period, str(path))

    values = _to_numeric_strict(frame, sensor_cols + target_cols, ".", header_lines=1)
    if schema.missing_sentinel is not None:
        values = values.mask(values == schema.missing_sentinel)

    channels = values[sensor_cols].to_numpy(dtype=float)
    targets = {c: values[c].to_numpy(dtype=float) for c in target_cols}
    return TimeSeriesDataset(
        name=schema.name,
        sampling_period=schema.sampling_period,
        channel_names=sensor_cols,
        channels=channels,
        targets=targets,
        target_units={c: schema.target_units.get(c, "") for c in target_cols},
        channel_unit=schema.channel_unit,
    )


# ---------------------------------------------------------------------------
# splits, standardization, tapped delay
# ---------------------------------------------------------------------------


def split_temporal(ds: TimeSeriesDataset, spec: SplitSpec):
    """Cut contiguous train/validation/test segments, never shuffling."""
    if spec.total > ds.n_samples:
        raise DataError(
            f"split {spec.key()} needs {spec.total} samples, dataset has {ds.n_samples}"
        )
    a = spec.train_len
    b = a + spec.val_len
    c = b + spec.test_len
    return (
        ds.slice(0, a, "[train]"),
        ds.slice(a, b, "[val]"),
        ds.slice(b, c, "[test]"),
    )


def fit_standardizer(values: np.ndarray, names=None) -> StandardizationParams:
    """Estimate per-feature z-score parameters on training data.

    values is [n, d] (or [n] for a single feature) with NaN marking missing
    entries; statistics are computed over present entries only.  Features
    with zero variance are dropped and recorded.
    """
    arr = np.asarray(values, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[:, None]
    n, d = arr.shape
    if names is None:
        names = [str(i) for i in range(d)]
    present = ~np.isnan(arr)
    counts = present.sum(axis=0)
    all_missing = [names[i] for i in range(d) if counts[i] == 0]
    if all_missing:
        raise DataError(f"features entirely missing in training segment: {all_missing}")
    mean = np.nanmean(arr, axis=0)
    std = np.nanstd(arr, axis=0, ddof=0)
    kept = np.flatnonzero(std > 0.0)
    dropped = [names[i] for i in range(d) if std[i] == 0.0]
    if kept.size == 0:
        raise DataError("all features have zero training variance")
    return StandardizationParams(
        mean=mean[kept], std=std[kept], kept=kept, dropped=dropped
    )


def apply_standardizer(params: StandardizationParams, values: np.ndarray) -> np.ndarray:
    """Z-score values with training parameters; drops the recorded columns."""
    arr = np.asarray(values, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[:, None]
    out = (arr[:, params.kept] - params.mean) / params.std
    return out[:, 0] if single else out


def invert_standardizer(params: StandardizationParams, values: np.ndarray) -> np.ndarray:
    """Map standardized values back to original units."""
    arr = np.asarray(values, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[:, None]
    out = arr * params.std + params.mean
    return out[:, 0] if single else out


def tapped_delay_expand(
    channels: np.ndarray,
    target: np.ndarray,
    cfg: TappedDelayConfig,
) -> TappedDelayView:
    """Expand a segment into windowed rows of L stacked sensor vectors.

    The first L-1 samples are dropped (no padding).  A row is excluded, and
    counted, when its window touches a missing sensor value or its target is
    missing.  taps=1 reproduces the static architecture exactly.
    """
    x = np.asarray(channels, dtype=float)
    y = np.asarray(target, dtype=float)
    if x.ndim != 2:
        raise DataError("channels must be [T, d]")
    t, d = x.shape
    if y.shape != (t,):
        raise DataError("target length does not match segment length")
    taps = cfg.taps
    if t < taps:
        raise DataError(f"segment of {t} samples is shorter than window of {taps}")

    n_windows = t - taps + 1
    # windows[k] covers source rows k .. k+taps-1; prediction time is k+taps-1
    windows = np.lib.stride_tricks.sliding_window_view(x, taps, axis=0)
    feats = windows.transpose(0, 2, 1).reshape(n_windows, taps * d)
    times = np.arange(taps - 1, t)
    targets = y[times]

    row_bad = np.isnan(feats).any(axis=1) | np.isnan(targets)
    n_excluded = int(row_bad.sum())
    keep = ~row_bad
    return TappedDelayView(
        features=np.ascontiguousarray(feats[keep]),
        target=targets[keep].copy(),
        times=times[keep].copy(),
        taps=taps,
        n_excluded=n_excluded,
    )


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------


def save_dataset(ds: TimeSeriesDataset, path) -> None:
    """Write the canonical CSV plus a sidecar metadata file (path + '.meta')."""
    header = ["index"] + list(ds.channel_names) + list(ds.target_names)
    cols = [np.arange(ds.n_samples) + ds.start_index]
    cols += [ds.channels[:, j] for j in range(ds.n_channels)]
    cols += [ds.targets[k] for k in ds.target_names]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(ds.n_samples):
            row = [str(int(cols[0][i]))] + [repr(float(c[i])) for c in cols[1:]]
            fh.write(",".join(row) + "\n")
    meta_lines = [
        f"name\t{ds.name}",
        f"sampling_period\t{repr(float(ds.sampling_period))}",
        f"channel_unit\t{ds.channel_unit}",
        "channels\t" + "\t".join(ds.channel_names),
        "targets\t" + "\t".join(ds.target_names),
        "target_units\t" + "\t".join(ds.target_units.get(k, "") for k in ds.target_names),
        f"start_index\t{ds.start_index}",
        "mask_convention\tnan-is-missing",
    ]
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write("\n".join(meta_lines) + "\n")


def load_canonical(path) -> TimeSeriesDataset:
    """Load a dataset previously written by save_dataset."""
    meta = {}
    with open(str(path) + ".meta", "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            meta[parts[0]] = parts[1:]
    channel_names = meta["channels"] if meta["channels"] != [""] else []
    target_names = meta["targets"] if meta["targets"] != [""] else []
    unit_list = meta.get("target_units", [])
    frame = pd.read_csv(path, sep=",")
    channels = frame[channel_names].to_numpy(dtype=float)
    targets = {k: frame[k].to_numpy(dtype=float) for k in target_names}
    return TimeSeriesDataset(
        name=meta["name"][0],
        sampling_period=float(meta["sampling_period"][0]),
        channel_names=channel_names,
        channels=channels,
        targets=targets,
        target_units={k: (unit_list[i] if i < len(unit_list) else "") for i, k in enumerate(target_names)},
        channel_unit=meta.get("channel_unit", [""])[0],
        start_index=int(meta.get("start_index", ["0"])[0]),
    )
