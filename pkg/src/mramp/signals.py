"""Signal and image containers, structured random generators, quality metrics
and the plain-text / PGM file formats."""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import keyed_rng
from .errors import DimensionError, ParameterError, UndefinedMetricError

FAMILIES = ("simple-sparse", "piecewise-constant", "image", "generic")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Signal:
    """A dense real vector together with its resolution and family tag."""

    samples: np.ndarray
    family: str = "generic"

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1 or samples.size < 1:
            raise DimensionError("a Signal holds a non-empty 1D vector")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("signal samples must be finite")
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family tag {self.family!r}")
        object.__setattr__(self, "samples", samples)

    @property
    def resolution(self):
        return self.samples.size

    def __len__(self):
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


@dataclass(frozen=True)
class Image:
    """A square grey-level image. ``vec`` uses column-major order."""

    pixels: np.ndarray
    pixel_range: tuple = field(default=(0.0, 255.0))

    def __post_init__(self):
        pixels = _frozen(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1] or pixels.shape[0] < 2:
            raise DimensionError(f"image must be square with side >= 2, got {pixels.shape}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def side(self):
        return self.pixels.shape[0]

    def vec(self):
        return self.pixels.flatten(order="F")

    @classmethod
    def from_vec(cls, v, side=None):
        v = np.asarray(v, dtype=float)
        side = side or math.isqrt(v.size)
        if side * side != v.size:
            raise DimensionError(f"{v.size} samples do not form a square image")
        return cls(v.reshape(side, side, order="F"))

    def __array__(self, dtype=None, copy=None):
        return self.pixels if dtype is None else self.pixels.astype(dtype)


@dataclass(frozen=True)
class ProblemGeometry:
    """Dimensions and ratios of an HR / LR compressed-sensing problem."""

    n1: int
    m: int
    d: int = 1
    eps1: float = 0.0
    eps_d: float = None

    def __post_init__(self):
        if self.d < 1 or self.n1 % self.d:
            raise ParameterError(f"d={self.d} must be a positive divisor of n1={self.n1}")
        if self.eps_d is None:
            object.__setattr__(self, "eps_d", self.d * self.eps1)

    @property
    def n_d(self):
        return self.n1 // self.d

    @property
    def delta1(self):
        return self.m / self.n1

    @property
    def delta_d(self):
        return self.m / self.n_d

    @property
    def rho_d(self):
        return self.eps_d / self.delta_d

    @property
    def underdetermined(self):
        return self.m < self.n_d


@dataclass(frozen=True)
class ThreePointSpec:
    """Three-point prior: 0 w.p. 1-eps, +mu / -mu w.p. eps/2 each."""

    gamma: float
    eps: float
    mu: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError("gamma must lie in (0, 1)")
        if not 0.0 <= self.eps <= 1.0:
            raise ParameterError("eps must lie in [0, 1]")

    @classmethod
    def from_gamma(cls, gamma, eps, delta, sigma_w=1.0, mapping=None):
        """Build the spec with ``mu = mapping(gamma, eps, delta, sigma_w)``.

        The default mapping is :func:`mramp.theory.three_point_mu`.
        """
        if mapping is None:
            from .theory import three_point_mu as mapping
        return cls(gamma=gamma, eps=eps, mu=float(mapping(gamma, eps, delta, sigma_w)))


def _check_rate(eps, name="eps"):
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"{name}={eps} outside [0, 1]")


def _bernoulli_gaussian(rng, n, eps):
    support = rng.random(n) < eps
    values = rng.standard_normal(n)
    return np.where(support, values, 0.0)


def gen_bernoulli_gaussian(n, eps, seed):
    """Entries independently nonzero w.p. ``eps`` with N(0, 1) values."""
    _check_rate(eps)
    if n < 1:
        raise ParameterError("n must be positive")
    x = _bernoulli_gaussian(keyed_rng(seed, "signal", "bg"), n, eps)
    return Signal(x, "simple-sparse")


def gen_piecewise_constant(n, eps, seed):
    """Cumulative sum of a Bernoulli-Gaussian innovation.

    The first sample is standard normal and each of the ``n - 1`` first
    differences is a change point w.p. ``eps``.
    """
    _check_rate(eps)
    if n < 1:
        raise ParameterError("n must be positive")
    rng = keyed_rng(seed, "signal", "pc")
    start = rng.standard_normal()
    jumps = _bernoulli_gaussian(rng, n - 1, eps)
    x = start + np.concatenate(([0.0], np.cumsum(jumps)))
    return Signal(x, "piecewise-constant")


def gen_lowpass_sparse(n1, d, eps_d, seed):
    """Bernoulli-Gaussian on the first ``n1 // d`` entries, zero elsewhere."""
    _check_rate(eps_d, "eps_d")
    if d < 1 or n1 % d:
        raise ParameterError(f"d={d} does not divide n1={n1}")
    n_d = n1 // d
    x = np.zeros(n1)
    x[:n_d] = _bernoulli_gaussian(keyed_rng(seed, "signal", "lowpass"), n_d, eps_d)
    return Signal(x, "simple-sparse")


def gen_three_point_mixture(spec, n1, d, seed):
    """Half three-point / half Bernoulli-Gaussian signal for the d = 2 noise
    sensitivity experiment.

    The first ``n1 / 2`` entries are nonzero w.p. ``1.8 * spec.eps`` with
    values ``+-spec.mu``; the second half is Bernoulli-Gaussian at rate
    ``0.2 * spec.eps``, which keeps the approximation energy independent of
    ``spec.mu``.
    """
    if d != 2 or n1 % 2:
        raise ParameterError("the three-point mixture is defined for d = 2 and even n1")
    if 1.8 * spec.eps > 1.0:
        raise ParameterError(f"rate 1.8*eps = {1.8 * spec.eps} exceeds 1")
    rng = keyed_rng(seed, "signal", "three-point")
    half = n1 // 2
    support = rng.random(half) < 1.8 * spec.eps
    signs = np.where(rng.random(half) < 0.5, -1.0, 1.0)
    first = np.where(support, spec.mu * signs, 0.0)
    second = _bernoulli_gaussian(rng, half, 0.2 * spec.eps)
    return Signal(np.concatenate((first, second)), "simple-sparse")


def gen_piecewise_constant_image(n, n_rects, seed, block=1, levels=(16.0, 240.0)):
    """Synthetic piecewise-constant image made of overlapping rectangles.

    Rectangle corners are aligned to ``block`` so that the image is constant
    on ``block x block`` tiles (zero approximation error for repetition
    upsampling by ``block``).
    """
    if n % block:
        raise ParameterError("block must divide n")
    rng = keyed_rng(seed, "signal", "pc-image")
    g = n // block
    lo, hi = levels
    img = np.full((g, g), rng.uniform(lo, hi))
    for _ in range(n_rects):
        r0, r1 = np.sort(rng.integers(0, g + 1, size=2))
        c0, c1 = np.sort(rng.integers(0, g + 1, size=2))
        img[r0:r1 + 1, c0:c1 + 1] = rng.uniform(lo, hi)
    return Image(np.kron(img, np.ones((block, block))))


def _pair(truth, estimate):
    t = np.asarray(truth, dtype=float)
    e = np.asarray(estimate, dtype=float)
    if t.shape != e.shape:
        raise DimensionError(f"shape mismatch {t.shape} vs {e.shape}")
    return t, e


def nmse(truth, estimate):
    """``||x - xhat||^2 / ||x||^2``."""
    t, e = _pair(truth, estimate)
    energy = float(np.sum(t * t))
    if energy == 0.0:
        raise UndefinedMetricError("NMSE is undefined for an all-zero truth")
    return float(np.sum((t - e) ** 2)) / energy


def nsnr(truth, estimate):
    """``||x||^2 / ||x - xhat||^2``; ``inf`` for a perfect estimate."""
    t, e = _pair(truth, estimate)
    err = float(np.sum((t - e) ** 2))
    if err == 0.0:
        return math.inf
    return float(np.sum(t * t)) / err


def psnr(reference, test, peak=255.0):
    """Peak SNR in dB. A zero MSE is reported as ``math.inf``."""
    r, t = _pair(reference, test)
    mse = float(np.mean((r - t) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


# --- file formats -----------------------------------------------------------

def write_signal(path, signal):
    x = np.asarray(signal, dtype=float)
    lines = [str(x.size)] + [repr(float(v)) for v in x]
    Path(path).write_text("\n".join(lines) + "\n")


def read_signal(path, family="generic"):
    tokens = Path(path).read_text().split()
    if not tokens:
        raise DimensionError(f"{path}: empty signal file")
    n = int(tokens[0])
    values = np.array([float(t) for t in tokens[1:]])
    if values.size != n:
        raise DimensionError(f"{path}: header says {n} samples, found {values.size}")
    return Signal(values, family)


def _pgm_tokens(data):
    # header fields: magic, width, height, maxval; '#' starts a comment
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and chr(data[pos]).isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not chr(data[pos]).isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        fields.append(data[start:pos].decode("ascii"))
    return fields, pos + 1


def read_pgm(path):
    """Read a square 8-bit binary (P5) PGM file into an :class:`Image`."""
    return Image(read_pgm_array(path))


def read_pgm_array(path):
    """Read an 8-bit binary (P5) PGM file of any shape as an (h, w) array."""
    data = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), offset = _pgm_tokens(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValueError(f"{path}: invalid PGM header") from exc
    w, h, maxval = int(w), int(h), int(maxval)
    if magic != "P5" or not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit binary PGM (P5) is supported")
    if len(data) - offset < w * h:
        raise ValueError(f"{path}: truncated pixel data")
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    return raw.reshape(h, w).astype(float) * (255.0 / maxval)


def write_pgm(path, image):
    pixels = np.clip(np.rint(np.asarray(image, dtype=float)), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
