"""File formats: PNG images, PFM float maps, match CSVs, exposure sidecars.

PNG loads accept 8-bit and 16-bit files and scale to [0, 1]; saves are 8-bit.
PFM files are written little-endian (scale -1.0) with the standard
bottom-to-top row order. Match CSVs carry one match per line as
x_ref,y_ref,x_src,y_src,score with full float round-trip precision.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage

MATCH_CSV_HEADER = "x_ref,y_ref,x_src,y_src,score"


class FileFormatError(ValueError):
    """Raised for unreadable or malformed image/map/CSV files."""


def load_png(path) -> np.ndarray:
    """Load a PNG as float32 in [0, 1]; grayscale (h, w) or color (h, w, 3)."""
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                arr = np.asarray(im.convert("I"), dtype=np.float64) / 65535.0
            elif im.mode in ("L", "RGB"):
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif im.mode in ("LA", "RGBA", "P", "1"):
                conv = "L" if im.mode in ("LA", "1") else "RGB"
                arr = np.asarray(im.convert(conv), dtype=np.float64) / 255.0
            else:
                raise FileFormatError(f"unsupported PNG mode {im.mode!r}: {path}")
    except FileNotFoundError:
        raise
    except FileFormatError:
        raise
    except Exception as exc:
        raise FileFormatError(f"cannot read image {path}: {exc}") from exc
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def save_png(path, img: np.ndarray) -> None:
    """Write an [0, 1] image as 8-bit PNG (grayscale or RGB)."""
    data = np.clip(np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 0.5), 0, 255)
    data = data.astype(np.uint8)
    if data.ndim == 2:
        PILImage.fromarray(data, mode="L").save(path, format="PNG")
    elif data.ndim == 3 and data.shape[2] == 3:
        PILImage.fromarray(data, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError("save_png expects (h, w) or (h, w, 3) data")


def save_pfm(path, data: np.ndarray) -> None:
    """Write a float map as little-endian PFM ('Pf' 1-channel, 'PF' 3-channel)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError("save_pfm expects (h, w) or (h, w, 3) data")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(arr[::-1]).astype("<f4").tobytes())


def load_pfm(path) -> np.ndarray:
    """Read a PFM file back as float32, (h, w) or (h, w, 3)."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic not in (b"PF", b"Pf"):
            raise FileFormatError(f"not a PFM file: {path}")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise FileFormatError(f"bad PFM dimension line: {path}")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        channels = 3 if magic == b"PF" else 1
        count = w * h * channels
        raw = fh.read(count * 4)
    if len(raw) != count * 4:
        raise FileFormatError(f"truncated PFM payload: {path}")
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(raw, dtype=dtype).astype(np.float32)
    arr = arr.reshape((h, w, channels)) if channels == 3 else arr.reshape((h, w))
    return arr[::-1].copy()


def save_matches_csv(path, matches: np.ndarray) -> None:
    """Write an (n, 5) match array as CSV with exact float round trip."""
    matches = np.asarray(matches, dtype=np.float64).reshape(-1, 5)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(MATCH_CSV_HEADER + "\n")
        for row in matches:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matches_csv(path) -> np.ndarray:
    """Read a match CSV back as an (n, 5) float64 array."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != MATCH_CSV_HEADER:
            raise FileFormatError(f"unexpected match CSV header in {path}: {header!r}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise FileFormatError(f"{path}:{line_no}: expected 5 columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FileFormatError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        return np.zeros((0, 5), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def load_exposures(path) -> list[tuple[str, float]]:
    """Read an exposure sidecar: one 'image-path exposure-seconds' per line."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.rsplit(None, 1)
            if len(parts) != 2:
                raise FileFormatError(f"{path}:{line_no}: expected 'path seconds'")
            try:
                entries.append((parts[0], float(parts[1])))
            except ValueError as exc:
                raise FileFormatError(f"{path}:{line_no}: {exc}") from exc
    return entries
