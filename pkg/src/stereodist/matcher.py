"""Classical block matching and a seeded random-dot stereogram generator.

The generator is the desk-scale benchmark: a random-dot left image, a right
image synthesized from it through an integer disparity field, and exact
ground truth with occluded / out-of-frame pixels marked invalid.  The same
``SceneSpec`` with ``noise_sigma > 0`` gives the "target domain" version of
the same geometry.

Random numbers come from numpy's PCG64 bit generator (``default_rng(seed)``),
drawn in a fixed order: left dots (H*W integers in [0, 256)), right-image
fill for disoccluded pixels (H*W integers), then, only when
``noise_sigma > 0``, H*W standard normals scaled by ``noise_sigma``.  The
clean and noisy versions of a scene therefore share every pixel except the
added noise.

Cost volumes are ``(H, W, d_max + 1)`` float64 with hypothesis ``i`` comparing
left pixel ``x`` with right pixel ``x - i``.  Hypotheses whose right pixel
falls outside the image get ``SENTINEL_COST``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import binary_erosion

from .errors import InputValidationError, StructuralError

SENTINEL_COST = 255.0
PATTERNS = ("constant", "tilted", "two_layer")


@dataclass(frozen=True)
class StereoPair:
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        if self.left.shape != self.right.shape or self.left.ndim != 2:
            raise StructuralError(
                f"left/right must be equal-size grayscale images, got {self.left.shape} and {self.right.shape}"
            )


@dataclass(frozen=True)
class SceneSpec:
    width: int = 128
    height: int = 96
    pattern: str = "two_layer"
    d_max: int = 32
    noise_sigma: float = 0.0
    seed: int = 0
    # constant disparity, or the background layer / plane offset
    disparity: float = 8.0
    # two_layer: foreground disparity and box (x0, y0, x1, y1), half-open; None = centred half-size box
    foreground: float = 20.0
    fg_box: tuple | None = None
    # tilted: d = disparity + slope_x * x + slope_y * y, rounded to integers
    slope_x: float = 0.1
    slope_y: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if d.get("fg_box") is not None:
            d["fg_box"] = tuple(int(v) for v in d["fg_box"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def box(self):
        if self.fg_box is not None:
            return self.fg_box
        w, h = self.width, self.height
        return (w // 4 + w // 8, h // 4, w - w // 8, h - h // 4)


def disparity_pattern(spec: SceneSpec) -> np.ndarray:
    """Integer ground-truth disparity field of the left image."""
    if spec.width < 1 or spec.height < 1:
        raise InputValidationError("scene dimensions must be positive")
    if spec.pattern not in PATTERNS:
        raise InputValidationError(f"unknown pattern {spec.pattern!r}; expected one of {PATTERNS}")
    h, w = spec.height, spec.width
    if spec.pattern == "constant":
        d = np.full((h, w), float(spec.disparity))
    elif spec.pattern == "tilted":
        yy, xx = np.mgrid[0:h, 0:w]
        d = spec.disparity + spec.slope_x * xx + spec.slope_y * yy
    else:
        d = np.full((h, w), float(spec.disparity))
        x0, y0, x1, y1 = spec.box()
        d[y0:y1, x0:x1] = spec.foreground
    d = np.round(d)
    if d.min() < 0 or d.max() > spec.d_max:
        raise InputValidationError(
            f"pattern disparities span [{d.min():g}, {d.max():g}], outside [0, d_max={spec.d_max}]"
        )
    return d


def generate_stereogram(spec: SceneSpec):
    """Return ``(StereoPair, gt disparity, validity mask)`` for ``spec``.

    ``right[y, x - d] = left[y, x]``; where several left pixels land on one
    right pixel the largest disparity (nearest surface) wins and the others
    are occluded.  Left pixels that leave the frame or are occluded are
    invalid in the mask.
    """
    d = disparity_pattern(spec)
    h, w = d.shape
    rng = np.random.default_rng(spec.seed)
    left = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    right = rng.integers(0, 256, size=(h, w), dtype=np.uint8)

    di = d.astype(np.int64)
    yy, xx = np.mgrid[0:h, 0:w]
    xr = xx - di
    inside = xr >= 0
    target = np.where(inside, yy * w + xr, -1)

    zbuf = np.full(h * w, -1, dtype=np.int64)
    np.maximum.at(zbuf, target[inside], di[inside])
    visible = inside & (di == zbuf[np.clip(target, 0, None)])
    right.reshape(-1)[target[visible]] = left[visible]

    if spec.noise_sigma > 0:
        noise = rng.standard_normal((h, w)) * spec.noise_sigma
        right = np.clip(np.round(right + noise), 0, 255).astype(np.uint8)

    return StereoPair(left, right), d, visible


def _check_args(pair, d_max, window):
    if window < 1 or window % 2 == 0:
        raise InputValidationError(f"window must be an odd positive size, got {window}")
    if d_max < 1:
        raise InputValidationError(f"d_max must be >= 1, got {d_max}")
    if d_max >= pair.left.shape[1]:
        raise InputValidationError(f"d_max={d_max} must be smaller than the image width {pair.left.shape[1]}")


def _box_sum(a, win):
    """Sum over every full ``win x win`` window of ``a`` (valid region only)."""
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    s[1:, 1:] = a.cumsum(0).cumsum(1)
    return s[win:, win:] - s[:-win, win:] - s[win:, :-win] + s[:-win, :-win]


def _finish(vol):
    mask = ~np.all(vol == SENTINEL_COST, axis=-1)
    return vol, mask


def sad_cost_volume(pair: StereoPair, d_max: int, window: int = 9):
    """Mean absolute intensity difference over a ``window``-square patch.

    Image borders are edge-replicated so every in-frame hypothesis has a full patch.
    """
    _check_args(pair, d_max, window)
    r = window // 2
    left = np.pad(pair.left.astype(np.float64), r, mode="edge")
    right = np.pad(pair.right.astype(np.float64), r, mode="edge")
    h, w = pair.left.shape
    vol = np.full((h, w, d_max + 1), SENTINEL_COST)
    area = float(window * window)
    for i in range(d_max + 1):
        diff = np.abs(left[:, i:] - right[:, : right.shape[1] - i])
        # column k of the box sums is left pixel x = k + i
        vol[:, i:, i] = _box_sum(diff, window) / area
    return _finish(vol)


def census_transform(img, window: int) -> np.ndarray:
    """Boolean ``(H, W, window**2 - 1)`` codes; bit set where neighbour < centre.

    Neighbours are visited in row-major order of the window, skipping the centre.
    """
    r = window // 2
    a = np.asarray(img, dtype=np.int32)
    h, w = a.shape
    p = np.pad(a, r, mode="edge")
    bits = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            bits.append(p[r + dy : r + dy + h, r + dx : r + dx + w] < a)
    if not bits:
        return np.zeros((h, w, 0), dtype=bool)
    return np.stack(bits, axis=-1)


def census_cost_volume(pair: StereoPair, d_max: int, window: int = 9):
    """Hamming distance of census codes divided by the code length (costs in [0, 1])."""
    _check_args(pair, d_max, window)
    if window < 3:
        raise InputValidationError("census needs a window of at least 3")
    cl = census_transform(pair.left, window)
    cr = census_transform(pair.right, window)
    nbits = cl.shape[-1]
    h, w = pair.left.shape
    vol = np.full((h, w, d_max + 1), SENTINEL_COST)
    for i in range(d_max + 1):
        vol[:, i:, i] = np.count_nonzero(cl[:, i:] != cr[:, : w - i], axis=-1) / nbits
    return _finish(vol)


MATCHERS = {"sad": sad_cost_volume, "census": census_cost_volume}


def interior_mask(mask, window: int):
    """Pixels whose whole ``window``-square patch is valid and inside the image.

    This is ``mask`` eroded by the window, with everything outside the image
    treated as invalid.
    """
    mask = np.asarray(mask, dtype=bool)
    if window <= 1:
        return mask.copy()
    return binary_erosion(mask, structure=np.ones((window, window), dtype=bool), border_value=0)


def argmin_accuracy(vol, gt, mask) -> float:
    """Fraction of masked pixels whose lowest-cost hypothesis equals ``gt`` exactly."""
    mask = np.asarray(mask, dtype=bool)
    hit = np.argmin(vol, axis=-1) == np.round(gt).astype(np.int64)
    return float(hit[mask].mean())
