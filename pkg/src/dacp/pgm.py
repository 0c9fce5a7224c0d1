"""Binary PGM (P5, maxval 255) reading and writing."""

import numpy as np

from .errors import DatasetError


def write_pgm(path, image):
    """Write a 2D uint8 (or [0,1] float) array as a binary PGM file."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM image must be 2D, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path):
    """Read a binary PGM file into a float array scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise DatasetError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval; '#' comment lines allowed
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DatasetError(f"{path}: truncated PGM header at byte {pos}")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise DatasetError(f"{path}: unsupported PGM maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise DatasetError(f"{path}: expected {width * height} pixels, "
                           f"file holds {pixels.size} (offset {pos})")
    return pixels.reshape(height, width).astype(np.float64) / 255.0
