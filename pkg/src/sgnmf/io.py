"""Readers and writers: spectral libraries, ENVI-style cubes, matrix CSVs and run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import ObservationMatrix

SENTINEL = -1e30

_ENVI_DTYPES = {1: "u1", 2: "i2", 3: "i4", 4: "f4", 5: "f8", 12: "u2", 13: "u4", 14: "i8", 15: "u8"}


class ParseError(ValueError):
    """Malformed text input; the message carries the file and line."""


class DataError(ValueError):
    """Input parsed but its content is unusable."""


class FormatError(ValueError):
    """Binary payload inconsistent with its header."""


class UnknownSignatureError(KeyError):
    pass


# --------------------------------------------------------------------------- libraries


@dataclass(frozen=True)
class SpectralLibrary:
    names: list[str]
    wavelengths: np.ndarray
    signatures: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        sig = np.asarray(self.signatures, dtype=float)
        if sig.ndim != 2 or sig.shape != (wl.size, len(self.names)):
            raise DataError(
                f"signatures {sig.shape} inconsistent with {wl.size} wavelengths "
                f"and {len(self.names)} names")
        if wl.size > 1 and not np.all(np.diff(wl) > 0):
            raise DataError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(sig)):
            raise DataError("signatures contain non-finite values")
        object.__setattr__(self, "names", list(self.names))
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "signatures", sig)

    @property
    def num_bands(self) -> int:
        return self.wavelengths.size

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownSignatureError(f"signature {name!r} not in library") from None

    def matrix(self, ids) -> np.ndarray:
        """``L x P`` matrix of the requested signatures, in the given order."""
        return self.signatures[:, [self.index(n) for n in ids]].copy()

    def resample_nearest(self, wavelengths) -> "SpectralLibrary":
        """Sample every signature at the library band nearest to each target wavelength."""
        target = np.asarray(wavelengths, dtype=float)
        pos = np.clip(np.searchsorted(self.wavelengths, target), 1, self.num_bands - 1)
        left = self.wavelengths[pos - 1]
        right = self.wavelengths[pos]
        pick = np.where(target - left <= right - target, pos - 1, pos)
        if self.num_bands == 1:
            pick = np.zeros_like(pick)
        return SpectralLibrary(self.names, target, self.signatures[pick])


def fill_sentinels(values, where: str = "signature") -> np.ndarray:
    """Replace deleted-channel markers (<= -1e30) by linear interpolation over channel index."""
    v = np.array(values, dtype=float)
    bad = v <= SENTINEL
    if bad.all():
        raise DataError(f"{where}: every channel is a missing-data sentinel")
    if bad.any():
        idx = np.arange(v.size)
        v[bad] = np.interp(idx[bad], idx[~bad], v[~bad])
    return v


def _read_column_file(path: Path) -> np.ndarray:
    """Header lines followed by one number per line."""
    values = []
    started = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text.split()[0]))
                started = True
            except ValueError:
                if started:
                    raise ParseError(f"{path}:{lineno}: expected a number, got {text!r}") from None
    if not values:
        raise ParseError(f"{path}: no numeric data")
    return np.array(values)


def _load_usgs_ascii(path: Path) -> SpectralLibrary:
    if not path.is_dir():
        raise ParseError(f"{path}: usgs_ascii expects a directory of per-signature files")
    files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() in (".txt", ".asc"))
    wl_files = [p for p in files if "wavelength" in p.name.lower()]
    if len(wl_files) != 1:
        raise ParseError(f"{path}: expected exactly one wavelength file, found {len(wl_files)}")
    wl = _read_column_file(wl_files[0])
    names, cols = [], []
    for p in files:
        if p is wl_files[0]:
            continue
        v = _read_column_file(p)
        if v.size != wl.size:
            raise ParseError(f"{p}: {v.size} channels but {wl.size} wavelengths")
        names.append(p.stem)
        cols.append(fill_sentinels(v, str(p)))
    if not cols:
        raise ParseError(f"{path}: no signature files")
    return SpectralLibrary(names, wl, np.column_stack(cols))


def _load_library_csv(path: Path) -> SpectralLibrary:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}:1: empty file")
    header = rows[0]
    if len(header) < 2:
        raise ParseError(f"{path}:1: need a wavelength column and at least one signature")
    data = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(x) for x in row])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not data:
        raise ParseError(f"{path}: no data rows")
    arr = np.array(data)
    sig = np.column_stack([fill_sentinels(arr[:, j], f"{path}:{header[j]}")
                           for j in range(1, arr.shape[1])])
    return SpectralLibrary([h.strip() for h in header[1:]], arr[:, 0], sig)


def load_spectral_library(path, format: str = "csv") -> SpectralLibrary:
    """Load a library from a CSV file or a directory of USGS-style ASCII files.

    CSV: header ``wavelength,<name>,...`` then one row per band.
    ``usgs_ascii``: a directory holding one wavelength file (name contains
    "wavelength") and one file per signature, each with header lines followed
    by a single value per line.
    """
    path = Path(path)
    if format == "csv":
        return _load_library_csv(path)
    if format == "usgs_ascii":
        return _load_usgs_ascii(path)
    raise ValueError(f"unknown library format {format!r}")


def save_spectral_library_csv(lib: SpectralLibrary, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["wavelength", *lib.names])
        for wl, row in zip(lib.wavelengths, lib.signatures):
            out.writerow([repr(float(wl)), *(repr(float(v)) for v in row)])


# --------------------------------------------------------------------------- cubes


@dataclass(frozen=True)
class CubeHeader:
    samples: int
    lines: int
    bands: int
    interleave: str = "bsq"
    data_type: str = "f4"
    byte_order: str = "little"
    header_offset: int = 0

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.data_type).newbyteorder("<" if self.byte_order == "little" else ">")

    @property
    def payload_bytes(self) -> int:
        return self.samples * self.lines * self.bands * self.dtype.itemsize


def _header_value(raw: str, key: str):
    if key in ("samples", "lines", "bands", "header_offset"):
        return int(raw)
    if key == "interleave":
        val = raw.lower()
        if val not in ("bsq", "bil", "bip"):
            raise ParseError(f"unknown interleave {raw!r}")
        return val
    if key == "data_type":
        if raw.isdigit():
            try:
                return _ENVI_DTYPES[int(raw)]
            except KeyError:
                raise ParseError(f"unsupported data type code {raw}") from None
        return np.dtype(raw).str.lstrip("<>|=")
    if key == "byte_order":
        val = raw.lower()
        if val in ("0", "little"):
            return "little"
        if val in ("1", "big"):
            return "big"
        raise ParseError(f"unknown byte order {raw!r}")
    return raw


def parse_header(path) -> CubeHeader:
    """Parse a ``key = value`` header (ENVI-style; unknown keys are ignored)."""
    known = {"samples", "lines", "bands", "interleave", "data_type", "byte_order", "header_offset"}
    vals = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.upper() == "ENVI" or text.startswith(("#", ";")):
                continue
            if "=" not in text:
                raise ParseError(f"{path}:{lineno}: expected key = value, got {text!r}")
            key, _, raw = text.partition("=")
            key = re.sub(r"\s+", "_", key.strip().lower())
            if key in known:
                try:
                    vals[key] = _header_value(raw.strip().strip("{}").strip(), key)
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
    missing = {"samples", "lines", "bands"} - vals.keys()
    if missing:
        raise ParseError(f"{path}: missing header keys {sorted(missing)}")
    return CubeHeader(**vals)


def write_header(path, hdr: CubeHeader) -> None:
    codes = {v: k for k, v in _ENVI_DTYPES.items()}
    with open(path, "w") as fh:
        fh.write("ENVI\n")
        fh.write(f"samples = {hdr.samples}\nlines = {hdr.lines}\nbands = {hdr.bands}\n")
        fh.write(f"header offset = {hdr.header_offset}\n")
        fh.write(f"data type = {codes[hdr.data_type]}\n")
        fh.write(f"interleave = {hdr.interleave}\n")
        fh.write(f"byte order = {0 if hdr.byte_order == 'little' else 1}\n")


def _keep_bands(band_mask, bands: int) -> np.ndarray:
    if band_mask is None:
        return np.arange(bands)
    mask = np.asarray(band_mask)
    if mask.size == 0:
        return np.arange(bands)
    if mask.dtype == bool:
        if mask.size != bands:
            raise ValueError(f"boolean band mask has {mask.size} entries, cube has {bands} bands")
        return np.flatnonzero(mask)
    drop = mask.astype(int).ravel()
    if drop.min() < 0 or drop.max() >= bands:
        raise ValueError(f"band index out of range [0, {bands}): {drop.min()}..{drop.max()}")
    keep = np.ones(bands, dtype=bool)
    keep[drop] = False
    return np.flatnonzero(keep)


def load_cube(header_path, data_path=None, band_mask=None, scale: float | None = None) -> ObservationMatrix:
    """Read an interleaved binary cube as an ``L x N`` observation matrix.

    Args:
        header_path: ``key = value`` header file.
        data_path: payload file; defaults to the header path without its suffix.
        band_mask: either a boolean keep-mask with one entry per band, or a
            sequence of 0-based band indices to drop.
        scale: optional divisor applied to the raw values (e.g. 10000 for
            integer-scaled reflectance).
    """
    header_path = Path(header_path)
    hdr = parse_header(header_path)
    if data_path is None:
        data_path = header_path.with_suffix("")
    size = os.path.getsize(data_path) - hdr.header_offset
    if size != hdr.payload_bytes:
        raise FormatError(
            f"{data_path}: payload is {size} bytes, header implies "
            f"{hdr.samples}x{hdr.lines}x{hdr.bands}x{hdr.dtype.itemsize} = {hdr.payload_bytes}")
    keep = _keep_bands(band_mask, hdr.bands)
    raw = np.fromfile(data_path, dtype=hdr.dtype, offset=hdr.header_offset)
    if hdr.interleave == "bsq":
        cube = raw.reshape(hdr.bands, hdr.lines, hdr.samples)
    elif hdr.interleave == "bil":
        cube = raw.reshape(hdr.lines, hdr.bands, hdr.samples).transpose(1, 0, 2)
    else:
        cube = raw.reshape(hdr.lines, hdr.samples, hdr.bands).transpose(2, 0, 1)
    X = cube[keep].reshape(keep.size, hdr.lines * hdr.samples).astype(float)
    if scale:
        X /= scale
    return ObservationMatrix(X, spatial_dims=(hdr.lines, hdr.samples))


def save_cube(header_path, data_path, X, spatial_dims, interleave: str = "bsq",
              data_type: str = "f4", byte_order: str = "little") -> CubeHeader:
    """Write ``X`` (``L x N``, row-major pixels) as a binary cube plus header."""
    X = np.asarray(X)
    lines, samples = spatial_dims
    hdr = CubeHeader(samples=samples, lines=lines, bands=X.shape[0], interleave=interleave,
                     data_type=np.dtype(data_type).str.lstrip("<>|="), byte_order=byte_order)
    cube = X.reshape(hdr.bands, lines, samples)
    order = {"bsq": (0, 1, 2), "bil": (1, 0, 2), "bip": (1, 2, 0)}[interleave]
    np.ascontiguousarray(cube.transpose(order)).astype(hdr.dtype).tofile(data_path)
    write_header(header_path, hdr)
    return hdr


def load_band_mask(path) -> list[int]:
    """Read 0-based band indices to drop; ``#`` starts a comment, ranges ``a-b`` are inclusive."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            for tok in re.split(r"[,\s]+", line.split("#", 1)[0].strip()):
                if not tok:
                    continue
                try:
                    if "-" in tok:
                        a, b = (int(v) for v in tok.split("-"))
                        out.extend(range(a, b + 1))
                    else:
                        out.append(int(tok))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad band index {tok!r}") from None
    return sorted(set(out))


def cuprite_band_mask() -> list[int]:
    """Default drop list taking the 224-band Cuprite cube to 188 bands."""
    with resources.as_file(resources.files("sgnmf") / "data" / "cuprite_band_mask.txt") as p:
        return load_band_mask(p)


# --------------------------------------------------------------------------- matrices and results


def save_matrix_csv(M, path) -> None:
    """Write a dense matrix, one CSV row per matrix row, in round-trip precision."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for row in M:
            out.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    return np.array(rows)


def digest(M) -> str:
    """sha256 over shape and float64 bytes."""
    M = np.ascontiguousarray(np.asarray(M, dtype=np.float64))
    h = hashlib.sha256(repr(M.shape).encode())
    h.update(M.tobytes())
    return h.hexdigest()


def write_manifest(path, entries: dict) -> None:
    """Flat ``key=value`` text, one pair per line, in insertion order."""
    with open(path, "w") as fh:
        for key, val in entries.items():
            if isinstance(val, float):
                val = repr(val)
            fh.write(f"{key}={val}\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            out[key] = val
    return out


def save_result(result, report=None, out_dir=".", inputs: dict | None = None,
                extra: dict | None = None) -> Path:
    """Write ``A.csv``, ``S.csv``, ``trace.csv``, optional ``report.txt`` and ``manifest.txt``.

    ``inputs`` maps names to arrays whose digests go in the manifest; ``extra``
    adds arbitrary key/value pairs (seeds, file names). Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(result.A, out / "A.csv")
    save_matrix_csv(result.S, out / "S.csv")
    result.write_trace(out / "trace.csv")
    if report is not None:
        report.write(out / "report.txt")

    entries = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    if result.config is not None:
        for key, val in result.config.as_dict().items():
            entries[f"config.{key}"] = val
    entries["iterations"] = result.iterations
    entries["stop_reason"] = result.stop_reason
    entries["final_residual_fro"] = result.trace[-1].residual_fro if result.trace else float("nan")
    for name, arr in (inputs or {}).items():
        entries[f"input.{name}.shape"] = "x".join(str(d) for d in np.shape(arr))
        entries[f"input.{name}.sha256"] = digest(arr)
    entries["output.A.sha256"] = digest(result.A)
    entries["output.S.sha256"] = digest(result.S)
    for key, val in (extra or {}).items():
        entries[key] = val
    path = out / "manifest.txt"
    write_manifest(path, entries)
    return path
