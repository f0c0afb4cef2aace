"""Binary PPM (P6, maxval 255) image I/O.

Images travel through the package as float arrays of shape (h, w, 3) in
[0, 1].  The parser reports the byte offset of whatever it chokes on, so a
truncated or hand-mangled file is diagnosable.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError

_WS = b" \t\r\n"


class _Scanner:
    def __init__(self, buf: bytes, name: str):
        self.buf = buf
        self.pos = 0
        self.name = name

    def fail(self, msg: str):
        raise DataError(f"{self.name}: {msg} at byte {self.pos}")

    def skip_space(self):
        # whitespace and '#' comments (to end of line) separate header tokens
        while self.pos < len(self.buf):
            ch = self.buf[self.pos:self.pos + 1]
            if ch in (b"#",):
                while self.pos < len(self.buf) and self.buf[self.pos:self.pos + 1] != b"\n":
                    self.pos += 1
            elif ch in _WS:
                self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self.skip_space()
        if self.pos >= len(self.buf):
            self.fail("unexpected end of header")
        start = self.pos
        while self.pos < len(self.buf) and self.buf[self.pos:self.pos + 1] not in _WS + b"#":
            self.pos += 1
        return self.buf[start:self.pos]

    def integer(self, what: str) -> int:
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            self.pos -= len(tok)
            self.fail(f"expected integer {what}, got {tok[:16]!r}")


def read_ppm(path) -> np.ndarray:
    """Load a P6 PPM into a float32 (h, w, 3) array scaled to [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file not found: {path}")
    sc = _Scanner(path.read_bytes(), str(path))
    magic = sc.token()
    if magic != b"P6":
        sc.pos = 0
        sc.fail(f"expected magic 'P6', got {magic[:8]!r}")
    width = sc.integer("width")
    height = sc.integer("height")
    if width < 1 or height < 1:
        sc.fail(f"invalid dimensions {width}x{height}")
    maxval = sc.integer("maxval")
    if maxval != 255:
        sc.fail(f"only maxval 255 is supported, got {maxval}")
    if sc.pos >= len(sc.buf) or sc.buf[sc.pos:sc.pos + 1] not in _WS:
        sc.fail("expected single whitespace after maxval")
    sc.pos += 1
    need = width * height * 3
    raw = sc.buf[sc.pos:sc.pos + need]
    if len(raw) != need:
        sc.pos += len(raw)
        raise DataError(f"{path}: pixel data truncated, expected {need} bytes, "
                        f"got {len(raw)} at byte {sc.pos}")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return img.astype(np.float32) / 255.0


def write_ppm(path, img: np.ndarray):
    """Quantize a float (h, w, 3) image in [0, 1] to 8-bit P6."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"write_ppm expects (h, w, 3), got {img.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    path.write_bytes(header + q.tobytes())


def chw_to_image(x: np.ndarray) -> np.ndarray:
    return np.transpose(np.asarray(x), (1, 2, 0))


def image_to_chw(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(np.asarray(img), (2, 0, 1)))
