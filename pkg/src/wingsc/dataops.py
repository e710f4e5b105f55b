"""Images, dictionary assembly, random projection and corruption generators.

Pixel values live in [0, 1]. Images are vectorized column-major (columns
stacked top to bottom, left to right). Every random generator takes an
explicit integer seed and draws from its own ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .classify import Dictionary


@dataclass(frozen=True)
class GrayImage:
    """Grayscale image, ``pixels`` has shape ``(height, width)`` with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise ValueError(f"image must be a nonempty 2-d array, got shape {p.shape}")
        if not np.all((p >= 0) & (p <= 1)):
            raise ValueError("pixel values must lie in [0, 1]")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


def image_to_vector(img: GrayImage) -> np.ndarray:
    return img.pixels.ravel(order="F").copy()


def vector_to_image(v, width: int, height: int) -> GrayImage:
    v = np.asarray(v, dtype=float)
    if v.shape != (width * height,):
        raise ValueError(f"vector of length {v.size} does not fit {width}x{height}")
    return GrayImage(v.reshape((height, width), order="F"))


def build_dictionary(samples, classes=None) -> Dictionary:
    """Stack ``(GrayImage, class_id)`` pairs into a normalized :class:`Dictionary`."""
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    shapes = {img.pixels.shape for img, _ in samples}
    if len(shapes) != 1:
        raise ValueError(f"mixed image dimensions: {sorted(shapes)}")
    cols = np.column_stack([image_to_vector(img) for img, _ in samples])
    labels = [int(c) for _, c in samples]
    return Dictionary.from_columns(cols, labels, classes=classes)


# -- random projection -------------------------------------------------------


@dataclass(frozen=True)
class ProjectionOp:
    """Linear map ``R`` of shape ``(d, m)``."""

    matrix: np.ndarray
    seed: int | None = None

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


def make_projection(d: int, m: int, seed: int = 0) -> ProjectionOp:
    """Gaussian random projection with i.i.d. ``N(0, 1/d)`` entries."""
    if d < 1:
        raise ValueError(f"target dimension must be >= 1, got {d}")
    if d > m:
        raise ValueError(f"target dimension {d} exceeds source dimension {m}")
    rng = np.random.default_rng(seed)
    R = rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, m))
    R.setflags(write=False)
    return ProjectionOp(matrix=R, seed=seed)


def apply_projection(p: ProjectionOp, v) -> np.ndarray:
    """``R @ v`` for a vector or a matrix of column vectors."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != p.m:
        raise ValueError(f"input has leading dimension {v.shape[0]}, expected {p.m}")
    return p.matrix @ v


def project_dictionary(p: ProjectionOp, dictionary: Dictionary) -> Dictionary:
    """Project every column and renormalize so unit norms hold in the projected space."""
    cols = apply_projection(p, dictionary.matrix)
    return Dictionary.from_columns(cols, dictionary.labels)


# -- corruption ----------------------------------------------------------------


def _pixel_count(fraction: float, total: int) -> int:
    if not (0 <= fraction <= 1):
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    # same float guard as the residual quantile rank
    return min(total, math.floor(fraction * total + 1e-9))


def corrupt_uniform(img: GrayImage, fraction: float, seed: int = 0) -> GrayImage:
    """Replace ``floor(fraction * w * h)`` random pixels with Uniform[0, 1] values."""
    total = img.pixels.size
    count = _pixel_count(fraction, total)
    rng = np.random.default_rng(seed)
    idx = rng.choice(total, size=count, replace=False)
    values = rng.uniform(0.0, 1.0, size=count)
    out = img.pixels.copy().ravel()
    out[idx] = values
    return GrayImage(out.reshape(img.pixels.shape))


def block_shape(width: int, height: int, fraction: float) -> tuple:
    """``(block_w, block_h)`` of the near-square occluder covering ``fraction`` of the image."""
    target = _pixel_count(fraction, width * height)
    if target == 0:
        return 0, 0
    bw = min(max(round(width * math.sqrt(fraction)), 1), width)
    bh = min(max(round(target / bw), 1), height)
    return bw, bh


def occlude_block(img: GrayImage, fraction: float, color: str = "white", seed: int = 0) -> GrayImage:
    """Paint one randomly placed rectangle white (1.0) or black (0.0)."""
    if color not in ("white", "black"):
        raise ValueError(f"color must be 'white' or 'black', got {color!r}")
    bw, bh = block_shape(img.width, img.height, fraction)
    if bw == 0:
        return img
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, img.height - bh + 1))
    left = int(rng.integers(0, img.width - bw + 1))
    out = img.pixels.copy()
    out[top : top + bh, left : left + bw] = 1.0 if color == "white" else 0.0
    return GrayImage(out)


CORRUPTION_KINDS = ("uniform_pixels", "block_white", "block_black")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if not (0 <= self.fraction <= 1):
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")

    def apply(self, img: GrayImage) -> GrayImage:
        if self.kind == "uniform_pixels":
            return corrupt_uniform(img, self.fraction, self.seed)
        color = "white" if self.kind == "block_white" else "black"
        return occlude_block(img, self.fraction, color, self.seed)


# -- PGM I/O -------------------------------------------------------------------


class PGMFormatError(ValueError):
    pass


def _header_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise PGMFormatError("missing whitespace after PGM header")
    return tokens, pos + 1


def load_pgm(path) -> GrayImage:
    """Read a binary (P5) 8-bit PGM, scaling pixels by ``1 / maxval``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PGMFormatError(f"{path}: only binary PGM (P5) is supported, got {data[:2]!r}")
    (magic, w, h, maxval), offset = _header_tokens(data, 4)
    if magic != b"P5":
        raise PGMFormatError(f"{path}: bad magic number {magic!r}")
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PGMFormatError(f"{path}: malformed header: {exc}") from None
    if width < 1 or height < 1:
        raise PGMFormatError(f"{path}: invalid size {width}x{height}")
    if not (1 <= maxval <= 255):
        raise PGMFormatError(f"{path}: unsupported maxval {maxval}, need 1..255")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise PGMFormatError(f"{path}: expected {width * height} pixel bytes, got {len(raster)}")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(float)
    if px.max(initial=0) > maxval:
        raise PGMFormatError(f"{path}: pixel value exceeds maxval {maxval}")
    return GrayImage(px / maxval)


def save_pgm(img: GrayImage, path) -> None:
    """Write an 8-bit P5 PGM; values are rounded half-up to ``round(255 * p)``."""
    q = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    header = b"P5\n%d %d\n255\n" % (img.width, img.height)
    with open(path, "wb") as fh:
        fh.write(header + q.tobytes())


# -- synthetic data ------------------------------------------------------------


def synth_dataset(
    k: int,
    n_per_class: int,
    width: int,
    height: int,
    noise: float = 0.0,
    seed: int = 0,
    rank: int = 3,
    disjoint: bool = False,
):
    """Random low-rank classes of ``width x height`` images.

    Each class gets a nonnegative rank-``rank`` basis; samples are convex
    combinations of the basis plus Gaussian noise of standard deviation
    ``noise``, clipped to [0, 1]. With ``disjoint=True`` the pixels are
    split into ``k`` blocks and each class basis lives on its own block,
    which makes the class subspaces mutually orthogonal.

    Returns
    -------
    list of (GrayImage, int)
        Ordered by class id (1..k), then sample index.
    """
    if min(k, n_per_class, width, height, rank) < 1:
        raise ValueError("k, n_per_class, width, height and rank must be positive")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    m = width * height
    if disjoint and m < k:
        raise ValueError(f"{m} pixels cannot host {k} disjoint class supports")
    rng = np.random.default_rng(seed)
    supports = np.array_split(rng.permutation(m), k) if disjoint else None

    samples = []
    for c in range(k):
        basis = np.zeros((m, rank))
        if disjoint:
            basis[supports[c]] = rng.uniform(0.0, 1.0, size=(supports[c].size, rank))
        else:
            basis[:] = rng.uniform(0.0, 1.0, size=(m, rank))
        coef = rng.uniform(0.0, 1.0, size=(rank, n_per_class))
        coef /= coef.sum(axis=0)
        X = basis @ coef
        if noise > 0:
            X = X + rng.normal(0.0, noise, size=X.shape)
        X = np.clip(X, 0.0, 1.0)
        for j in range(n_per_class):
            samples.append((vector_to_image(X[:, j], width, height), c + 1))
    return samples


def write_dataset(samples, root) -> list:
    """Materialize samples as ``root/class_<id>/<index>.pgm``; returns written paths."""
    paths = []
    counters = {}
    for img, c in samples:
        i = counters.get(c, 0)
        counters[c] = i + 1
        d = os.path.join(root, f"class_{c}")
        os.makedirs(d, exist_ok=True)
        p = os.path.join(d, f"{i:04d}.pgm")
        save_pgm(img, p)
        paths.append(p)
    return paths


def load_image_dir(root):
    """Read a ``class_<id>/<name>.pgm`` tree into ``(GrayImage, class_id)`` pairs.

    Classes are returned in ascending id order, files sorted by name.
    """
    if not os.path.isdir(root):
        raise FileNotFoundError(f"image directory not found: {root}")
    found = []
    for entry in os.listdir(root):
        full = os.path.join(root, entry)
        if not (entry.startswith("class_") and os.path.isdir(full)):
            continue
        try:
            cid = int(entry[len("class_"):])
        except ValueError:
            continue
        found.append((cid, full))
    samples = []
    for cid, full in sorted(found):
        for name in sorted(os.listdir(full)):
            if name.lower().endswith(".pgm"):
                samples.append((load_pgm(os.path.join(full, name)), cid))
    if not samples:
        raise FileNotFoundError(f"no class_<id>/*.pgm images under {root}")
    return samples
