import numpy as np
import pytest

from ubssd.core import ModelDims, apply_fir, apply_linear
from ubssd.datagen import (GEOMETRIES, AudioError, InvalidDensityError, SourceSpec, gen_geom3d,
                           gen_image_density, gen_letters, gen_mixing, load_audio, load_image,
                           make_scene, sample_image_density, write_wav)
from ubssd.glyphs import LETTER_MASKS, standin_faces


def test_enough_geometries():
    assert len(GEOMETRIES) >= 6


def test_sphere_component_is_white():
    s = gen_geom3d(1, 100_000, seed=0, geometries=["sphere"]).values
    assert s.shape == (3, 100_000)
    assert np.abs(np.cov(s) - np.eye(3)).max() < 0.05


def test_geom3d_deterministic():
    a, b = gen_geom3d(6, 1000, seed=3), gen_geom3d(6, 1000, seed=3)
    assert a == b
    assert not np.array_equal(a.values, gen_geom3d(6, 1000, seed=4).values)


def test_geom3d_components_uncorrelated():
    s = gen_geom3d(6, 100_000, seed=1).values
    C = np.cov(s)
    for i in range(6):
        for j in range(6):
            if i != j:
                assert np.abs(C[3 * i:3 * i + 3, 3 * j:3 * j + 3]).max() < 0.05


def test_geom3d_too_many():
    with pytest.raises(ValueError):
        gen_geom3d(len(GEOMETRIES) + 1, 10, seed=0)


def test_constant_image_is_uniform():
    z = gen_image_density([np.ones((8, 5))], 100_000, seed=0).values
    assert np.abs(z.mean(axis=1)).max() < 0.02
    # uniform on a rectangle: kurtosis 1.8 per axis
    kurt = (z ** 4).mean(axis=1)
    np.testing.assert_allclose(kurt, 1.8, atol=0.05)


def test_two_pixel_frequencies():
    rng = np.random.default_rng(1)
    pts = sample_image_density(np.array([[3.0, 1.0]]), 100_000, rng)
    frac_left = np.mean(pts[0] < 1.0)
    assert abs(frac_left - 0.75) < 0.01
    assert pts[1].min() >= 0 and pts[1].max() <= 1


def test_image_density_errors():
    with pytest.raises(InvalidDensityError):
        gen_image_density([np.zeros((3, 3))], 10, seed=0)
    with pytest.raises(InvalidDensityError):
        sample_image_density(np.array([[-1.0, 2.0]]), 10, np.random.default_rng(0))


def test_image_density_deterministic():
    faces = standin_faces(3)
    assert gen_image_density(faces, 500, seed=2) == gen_image_density(faces, 500, seed=2)


def test_letters():
    z = gen_letters(20_000, seed=0)
    assert z.dim == 4
    C = np.cov(z.values, bias=True)
    # whitening is per component, so only the diagonal blocks are exact
    np.testing.assert_allclose(C[:2, :2], np.eye(2), atol=1e-10)
    np.testing.assert_allclose(C[2:, 2:], np.eye(2), atol=1e-10)
    assert np.abs(C[:2, 2:]).max() < 0.05
    assert gen_letters(100, seed=5) == gen_letters(100, seed=5)
    assert set(LETTER_MASKS) == {"A", "B"}


def test_image_from_file(tmp_path):
    from PIL import Image

    img = (LETTER_MASKS["A"] * 255).astype(np.uint8)
    Image.fromarray(img).save(tmp_path / "a.png")
    np.testing.assert_array_equal(load_image(tmp_path / "a.png"), img.astype(float))
    assert gen_image_density([tmp_path / "a.png"], 200, seed=0).dim == 2


def test_standin_faces():
    faces = standin_faces()
    assert len(faces) == 10
    assert all(f.min() >= 0 and f.sum() > 0 for f in faces)
    assert not np.array_equal(faces[0], faces[1])


@pytest.fixture
def wavs(tmp_path):
    t = np.arange(4000)
    paths = []
    for k in range(2):
        stereo = np.stack([8000 * np.sin(0.01 * (k + 1) * t),
                           5000 * np.sin(0.037 * (k + 2) * t) + 3000 * np.sin(0.01 * (k + 1) * t)])
        p = tmp_path / f"song{k}.wav"
        write_wav(p, stereo)
        paths.append(p)
    return paths


def test_audio_whitened(wavs):
    z = load_audio(wavs[:1], 1000).values
    np.testing.assert_allclose(np.cov(z, bias=True), np.eye(2), atol=1e-6)


def test_audio_offset_too_large(wavs):
    with pytest.raises(AudioError):
        load_audio(wavs[:1], 1000, offset=3500)


def test_audio_two_files_layout(wavs):
    spec = SourceSpec("audio", M=2, d=2, audio=tuple(wavs))
    scene = make_scene(spec, ModelDims(2, 2, 8, 1, 1000), seed=0)
    assert scene.sources.dim == 4
    assert scene.partition.groups == [[0, 1], [2, 3]]


def test_audio_rejects_mono(tmp_path):
    import wave

    p = tmp_path / "mono.wav"
    with wave.open(str(p), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(8000)
        wf.writeframes(b"\0\0" * 100)
    with pytest.raises(AudioError):
        load_audio([p], 10)


class TestMixing:
    def test_shape_and_rank(self):
        H = gen_mixing(ModelDims(d=2, M=2, D_x=8, L=1, T=100), seed=7)
        assert H.degree == 1 and H.taps[0].shape == (8, 4)
        assert np.linalg.matrix_rank(H.taps[0]) == 4

    def test_deterministic(self):
        dims = ModelDims(2, 2, 8, 3, 100)
        np.testing.assert_array_equal(gen_mixing(dims, 7).stacked(), gen_mixing(dims, 7).stacked())

    def test_moments(self):
        H = gen_mixing(ModelDims(2, 5, 20, 24, 100), seed=1).stacked().ravel()[:10_000]
        assert abs(H.mean()) < 0.05
        assert abs(H.var() - 1) < 0.05


class TestScene:
    def test_instantaneous(self):
        scene = make_scene(SourceSpec("letters", 2, 2), ModelDims(2, 2, 8, 0, 500), seed=0)
        np.testing.assert_array_equal(scene.observation.values,
                                      apply_linear(scene.ground_truth_H0, scene.sources).values)

    def test_shapes_and_invariant(self):
        dims = ModelDims(2, 2, 8, 1, 500)
        scene = make_scene(SourceSpec("letters", 2, 2), dims, seed=1)
        assert scene.sources.values.shape == (4, 500)
        assert scene.observation.values.shape == (8, 500)
        assert scene.observation == apply_fir(scene.mixing, scene.sources)
        np.testing.assert_array_equal(scene.ground_truth_H0.matrix, scene.mixing.taps[0])

    def test_reproducible_digest(self):
        dims = ModelDims(3, 2, 12, 2, 300)
        spec = SourceSpec("geom3d", 2, 3)
        assert make_scene(spec, dims, seed=9).digest() == make_scene(spec, dims, seed=9).digest()
        assert make_scene(spec, dims, seed=9).digest() != make_scene(spec, dims, seed=10).digest()

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SourceSpec("letters", 3, 2)
        with pytest.raises(ValueError):
            SourceSpec("geom3d", 2, 2)
        with pytest.raises(ValueError):
            make_scene(SourceSpec("letters", 2, 2), ModelDims(3, 2, 12, 0, 10), seed=0)
