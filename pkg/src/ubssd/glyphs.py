"""Built-in bitmaps: letter masks and synthetic face images."""

import numpy as np

_A = """
.....####.....
.....####.....
....######....
....##..##....
...###..###...
...##....##...
..###....###..
..##......##..
..##########..
.############.
.###......###.
.##........##.
###........###
###........###
"""

_B = """
##########....
###########...
###......###..
###.......##..
###......###..
###########...
##########....
###########...
###.......###.
###........##.
###........##.
###.......###.
############..
###########...
"""


def _mask(art: str) -> np.ndarray:
    rows = [r for r in art.strip().splitlines()]
    return np.array([[1.0 if c == "#" else 0.0 for c in r] for r in rows])


LETTER_MASKS = {"A": _mask(_A), "B": _mask(_B)}


def _face(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    c = size / 2
    r = np.hypot(xx - c, yy - c)
    R = size * rng.uniform(0.38, 0.46)
    img = np.where(np.abs(r - R) < size * rng.uniform(0.03, 0.06), 1.0, 0.0)
    img += np.where(r < R, rng.uniform(0.05, 0.2), 0.0)
    ex, ey = size * rng.uniform(0.14, 0.2), size * rng.uniform(0.12, 0.2)
    er = size * rng.uniform(0.05, 0.09)
    for sx in (-1, 1):
        img += 0.9 * (np.hypot(xx - c - sx * ex, yy - c + ey) < er)
    # mouth: arc of a circle centered above or below the face center
    mr = size * rng.uniform(0.18, 0.3)
    my = c + size * rng.uniform(-0.1, 0.05)
    arc = (np.abs(np.hypot(xx - c, yy - my) - mr) < size * 0.035) & (yy > my + 0.3 * mr)
    if rng.uniform() < 0.3:
        arc = (np.abs(np.hypot(xx - c, yy - my - 1.6 * mr) - mr) < size * 0.035) & (yy < my + 0.9 * mr)
    img += 0.7 * arc
    return img / img.max()


def standin_faces(n: int = 10, size: int = 32, seed: int = 20071012) -> list:
    """Deterministic smiley-style grayscale images used as image-density sources."""
    rng = np.random.default_rng(seed)
    return [_face(size, rng) for _ in range(n)]
