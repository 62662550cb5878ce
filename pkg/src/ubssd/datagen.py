"""Hidden sources, random convolutive mixing and assembled scenes.

Every generated component is standardized on its own sample (zero mean,
identity covariance), so sources are white per component while distinct
components stay independent by construction.
"""

from __future__ import annotations

import hashlib
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import FirFilter, LinearMap, ModelDims, Partition, TimeSeries, apply_fir
from .glyphs import LETTER_MASKS, standin_faces

KINDS = ("geom3d", "image_density", "letters", "audio")
MAX_MIXING_RETRIES = 100
MAX_CONDITION = 1e6


class InvalidDensityError(ValueError):
    pass


class AudioError(ValueError):
    pass


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def whiten_component(z: np.ndarray) -> np.ndarray:
    """Zero-mean, identity-covariance version of a (d, T) sample (symmetric whitening)."""
    z = z - z.mean(axis=1, keepdims=True)
    C = z @ z.T / z.shape[1]
    lam, U = np.linalg.eigh((C + C.T) / 2)
    if lam.min() <= 1e-12 * max(lam.max(), 1e-300):
        raise InvalidDensityError("component covariance is singular")
    return (U / np.sqrt(lam)) @ U.T @ z


# -- 3D geometric objects ---------------------------------------------------

def _sphere(n, rng):
    v = rng.standard_normal((3, n))
    return v / np.linalg.norm(v, axis=0)


def _cube_surface(n, rng):
    pts = rng.uniform(-1, 1, (3, n))
    face = rng.integers(0, 6, n)
    axis = face % 3
    pts[axis, np.arange(n)] = np.where(face < 3, -1.0, 1.0)
    return pts


def _orthogonal_segments(n, rng):
    pts = np.zeros((3, n))
    axis = rng.integers(0, 3, n)
    pts[axis, np.arange(n)] = rng.uniform(-1, 1, n)
    return pts


_TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
_TETRA_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def _tetrahedron_wireframe(n, rng):
    edge = rng.integers(0, len(_TETRA_EDGES), n)
    ends = np.array(_TETRA_EDGES)[edge]
    u = rng.uniform(0, 1, n)
    a, b = _TETRA[ends[:, 0]], _TETRA[ends[:, 1]]
    return (a + u[:, None] * (b - a)).T


def _torus_surface(n, rng, R=1.0, r=0.4):
    # area element is proportional to R + r cos(phi): rejection on phi
    phi = np.empty(0)
    while phi.size < n:
        cand = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0, R + r, 2 * n) < R + r * np.cos(cand)
        phi = np.concatenate([phi, cand[keep]])
    phi = phi[:n]
    theta = rng.uniform(0, 2 * np.pi, n)
    rho = R + r * np.cos(phi)
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), r * np.sin(phi)])


def _helix(n, rng, turns=2.0):
    # constant pitch: arc length is linear in the parameter
    u = rng.uniform(0, 1, n)
    ang = 2 * np.pi * turns * u
    return np.stack([np.cos(ang), np.sin(ang), 2 * u - 1])


GEOMETRIES: dict[str, Callable] = {
    "sphere": _sphere,
    "cube": _cube_surface,
    "segments": _orthogonal_segments,
    "tetrahedron": _tetrahedron_wireframe,
    "torus": _torus_surface,
    "helix": _helix,
}


def gen_geom3d(M: int, T: int, seed=None, geometries: Sequence[str] | None = None) -> TimeSeries:
    """M independent 3-d components, each uniform on a built-in object."""
    names = list(geometries) if geometries else list(GEOMETRIES)
    if M > len(names):
        raise ValueError(f"only {len(names)} geometric objects available, asked for {M}")
    unknown = [g for g in names[:M] if g not in GEOMETRIES]
    if unknown:
        raise ValueError(f"unknown geometries: {unknown}")
    children = seed_sequence(seed).spawn(M)
    comps = [whiten_component(GEOMETRIES[g](T, np.random.default_rng(c)))
             for g, c in zip(names[:M], children)]
    return TimeSeries(np.vstack(comps))


# -- image densities --------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Grayscale intensities (rows top to bottom) of a PGM/PNG file."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=float)


def sample_image_density(image, n: int, rng) -> np.ndarray:
    """Draw n points with density proportional to pixel intensity.

    A pixel is picked with probability proportional to its intensity and
    the point is placed uniformly inside that pixel's unit square. Returns
    (2, n) coordinates (column, flipped row) so the image is upright.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise InvalidDensityError("image must be a non-empty 2-d array")
    if np.any(img < 0) or not np.all(np.isfinite(img)):
        raise InvalidDensityError("pixel intensities must be finite and non-negative")
    total = img.sum()
    if total <= 0:
        raise InvalidDensityError("image has no positive pixel")
    rng = as_rng(rng)
    H, W = img.shape
    idx = rng.choice(img.size, size=n, p=(img / total).ravel())
    row, col = np.divmod(idx, W)
    jitter = rng.uniform(0, 1, (2, n))
    return np.stack([col + jitter[0], (H - 1 - row) + jitter[1]])


def gen_image_density(images: Sequence, T: int, seed=None) -> TimeSeries:
    """One standardized 2-d component per image; arrays or file paths accepted."""
    if not images:
        raise ValueError("need at least one image")
    children = seed_sequence(seed).spawn(len(images))
    comps = []
    for img, child in zip(images, children):
        if isinstance(img, (str, Path)):
            img = load_image(img)
        comps.append(whiten_component(sample_image_density(img, T, np.random.default_rng(child))))
    return TimeSeries(np.vstack(comps))


def gen_letters(T: int, seed=None) -> TimeSeries:
    """Two 2-d components uniform on the glyphs A and B."""
    return gen_image_density([LETTER_MASKS["A"], LETTER_MASKS["B"]], T, seed)


# -- audio ------------------------------------------------------------------

def read_wav(path) -> np.ndarray:
    """Stereo 16-bit PCM WAV as a (2, n) float array."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 2 or wf.getsampwidth() != 2:
                raise AudioError(f"{path}: need 2-channel 16-bit PCM, got "
                                 f"{wf.getnchannels()} channels, {8 * wf.getsampwidth()}-bit")
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"cannot decode {path}: {exc}") from exc
    return np.frombuffer(raw, dtype="<i2").reshape(-1, 2).T.astype(float)


def write_wav(path, samples: np.ndarray, rate: int = 8000):
    """Write a (2, n) array, clipped to int16, as stereo PCM."""
    data = np.clip(np.round(samples), -32768, 32767).astype("<i2").T.tobytes()
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(data)


def load_audio(paths: Sequence, T: int, offset: int = 0) -> TimeSeries:
    """Each stereo file becomes one whitened d=2 component of T samples from ``offset``."""
    comps = []
    for path in paths:
        stereo = read_wav(path)
        if offset < 0 or stereo.shape[1] < offset + T:
            raise AudioError(f"{path}: {stereo.shape[1]} frames, need {offset + T}")
        comps.append(whiten_component(stereo[:, offset:offset + T]))
    if not comps:
        raise ValueError("need at least one audio file")
    return TimeSeries(np.vstack(comps))


# -- mixing and scenes ------------------------------------------------------

def gen_mixing(dims: ModelDims, seed=None) -> FirFilter:
    """L+1 standard normal D_x x D_s taps; resampled until H0 is well conditioned."""
    base = seed_sequence(seed).generate_state(2)
    for attempt in range(MAX_MIXING_RETRIES):
        rng = np.random.default_rng([*base, attempt])
        taps = rng.standard_normal((dims.L + 1, dims.D_x, dims.D_s))
        if np.linalg.cond(taps[0]) < MAX_CONDITION:
            return FirFilter.from_array(taps)
    raise RuntimeError(f"no well-conditioned H0 after {MAX_MIXING_RETRIES} draws")


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    M: int
    d: int
    seed: int = 0
    geometries: tuple = ()
    images: tuple = ()
    audio: tuple = ()
    audio_offset: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "geom3d" and self.d != 3:
            raise ValueError("geom3d sources have d=3")
        if self.kind == "letters" and (self.d, self.M) != (2, 2):
            raise ValueError("letters sources have d=2, M=2")
        if self.kind in ("image_density", "audio") and self.d != 2:
            raise ValueError(f"{self.kind} sources have d=2")
        if self.kind == "audio" and len(self.audio) != self.M:
            raise ValueError(f"audio needs M={self.M} files, got {len(self.audio)}")
        if self.kind == "image_density" and self.images and len(self.images) != self.M:
            raise ValueError(f"image_density needs M={self.M} images, got {len(self.images)}")


def gen_sources(spec: SourceSpec, T: int, seed=None) -> TimeSeries:
    seed = spec.seed if seed is None else seed
    if spec.kind == "geom3d":
        return gen_geom3d(spec.M, T, seed, spec.geometries or None)
    if spec.kind == "letters":
        return gen_letters(T, seed)
    if spec.kind == "image_density":
        images = list(spec.images) if spec.images else standin_faces(spec.M)
        return gen_image_density(images, T, seed)
    return load_audio(spec.audio, T, spec.audio_offset)


@dataclass(frozen=True, eq=False)
class Scene:
    sources: TimeSeries
    mixing: FirFilter
    observation: TimeSeries
    partition: Partition
    ground_truth_H0: LinearMap
    dims: ModelDims = field(default=None)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.sources.values, self.mixing.stacked(), self.observation.values):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def make_scene(spec: SourceSpec, dims: ModelDims, seed=None) -> Scene:
    """Sources, mixing and observation ``x = H[z] s`` for one seed."""
    if (spec.M, spec.d) != (dims.M, dims.d):
        raise ValueError(f"source spec (M={spec.M}, d={spec.d}) disagrees with dims {dims}")
    seed = spec.seed if seed is None else seed
    src_seed, mix_seed = seed_sequence(seed).spawn(2)
    sources = gen_sources(spec, dims.T, src_seed)
    mixing = gen_mixing(dims, mix_seed)
    observation = apply_fir(mixing, sources)
    return Scene(sources, mixing, observation, Partition.contiguous(dims.M, dims.d),
                 LinearMap(mixing.taps[0]), dims)
