import numpy as np
import pytest

from sgnmf.core import residual_fro
from sgnmf.io import UnknownSignatureError
from sgnmf.library import EXPERIMENT_1, EXPERIMENT_2
from sgnmf.metrics import sad_matrix
from sgnmf.synthgen import (SceneSpec, add_noise_snr, apply_lowpass, block_labels,
                            generate_block_abundances, generate_scene, load_scene, save_scene)


def test_block_abundances_default_layout():
    spec = SceneSpec(seed=3)
    S = generate_block_abundances(spec)
    assert S.shape == (6, 4096)
    assert spec.num_blocks == 64
    assert ((S == 0) | (S == 1)).all()
    np.testing.assert_array_equal(S.sum(axis=0), 1.0)
    assert (np.count_nonzero(S, axis=0) == 1).all()
    # every 8x8 block is constant
    labels = S.argmax(axis=0).reshape(64, 64)
    blocks = labels.reshape(8, 8, 8, 8).transpose(0, 2, 1, 3).reshape(64, 64)
    assert (blocks == blocks[:, :1]).all()
    assert np.unique(labels).size == 6


def test_block_abundances_deterministic():
    spec = SceneSpec(seed=11)
    np.testing.assert_array_equal(block_labels(spec), block_labels(spec))
    assert not np.array_equal(block_labels(spec), block_labels(spec.replace(seed=12)))


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(block=7)
    with pytest.raises(ValueError):
        SceneSpec(lpf=8)
    with pytest.raises(ValueError):
        SceneSpec(endmember_ids=("Calcite",))
    with pytest.raises(ValueError):
        SceneSpec(grid=(8, 8), endmember_ids=EXPERIMENT_1)


def test_lowpass_constant_image_unchanged():
    spec = SceneSpec(endmember_ids=EXPERIMENT_1[:3], grid=(16, 16), purity_cap=1.0)
    S = np.tile(np.array([[0.2], [0.3], [0.5]]), (1, 256))
    np.testing.assert_allclose(apply_lowpass(S, spec), S, atol=1e-15)


def test_lowpass_preserves_sums_and_caps_purity():
    spec = SceneSpec(seed=5)
    S = apply_lowpass(generate_block_abundances(spec), spec)
    assert (S >= 0).all()
    np.testing.assert_allclose(S.sum(axis=0), 1.0, atol=1e-12)
    assert S.max() <= 0.8


def test_lowpass_window_count_at_block_boundary():
    spec = SceneSpec(endmember_ids=("Calcite", "Alunite"), grid=(32, 32), block=8, lpf=9,
                     purity_cap=1.0)
    labels = np.zeros((32, 32), dtype=int)
    labels[:, 16:] = 1
    S = np.zeros((2, 1024))
    S[labels.ravel(), np.arange(1024)] = 1
    out = apply_lowpass(S, spec)
    # centre of the block edge: row 12, last column of material 0
    r, c = 12, 15
    window = [labels[i, j] for i in range(r - 4, r + 5) for j in range(c - 4, c + 5)]
    expected = [window.count(0) / 81, window.count(1) / 81]
    np.testing.assert_allclose(out[:, r * 32 + c], expected, atol=1e-14)
    assert expected == [45 / 81, 36 / 81]


def test_lowpass_gaussian_kernel_sums():
    spec = SceneSpec(seed=2, kernel="gaussian")
    S = apply_lowpass(generate_block_abundances(spec), spec)
    np.testing.assert_allclose(S.sum(axis=0), 1.0, atol=1e-12)
    assert S.max() <= 0.8


def test_noise_none_is_noop():
    X = np.random.default_rng(0).random((4, 10))
    Y, snr = add_noise_snr(X, None)
    np.testing.assert_array_equal(np.asarray(Y), X)
    assert snr == np.inf


def test_noise_snr_and_determinism(library):
    scene = generate_scene(library, SceneSpec(seed=4))
    Y1, snr1 = add_noise_snr(scene.X, 25.0, seed=7)
    Y2, snr2 = add_noise_snr(scene.X, 25.0, seed=7)
    np.testing.assert_array_equal(np.asarray(Y1), np.asarray(Y2))
    assert snr1 == snr2
    assert abs(snr1 - 25.0) <= 0.5
    clean = np.asarray(scene.X)
    independent = 10 * np.log10(np.mean(clean ** 2) / np.mean((np.asarray(Y1) - clean) ** 2))
    assert snr1 == pytest.approx(independent, rel=1e-12)


def test_scene_default(library):
    scene = generate_scene(library, SceneSpec(seed=1))
    assert scene.X.shape == (library.num_bands, 4096)
    assert scene.A_true.shape == (library.num_bands, 6)
    assert residual_fro(scene.X, scene.A_true, scene.S_true) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(scene.S_true.sum(axis=0), 1.0, atol=1e-12)
    assert scene.S_true.min() >= 0 and scene.S_true.max() <= 0.8
    assert scene.X.spatial_dims == (64, 64)


def test_scene_deterministic(library):
    spec = SceneSpec(seed=9, snr_db=20.0)
    a, b = generate_scene(library, spec), generate_scene(library, spec)
    np.testing.assert_array_equal(np.asarray(a.X), np.asarray(b.X))
    np.testing.assert_array_equal(a.S_true, b.S_true)


def test_unknown_endmember(library):
    with pytest.raises(UnknownSignatureError):
        generate_scene(library, SceneSpec(endmember_ids=("Calcite", "Unobtainium")))


def test_similar_materials_scene_has_smaller_angles(library):
    s1 = generate_scene(library, SceneSpec(endmember_ids=EXPERIMENT_1, seed=0))
    s2 = generate_scene(library, SceneSpec(endmember_ids=EXPERIMENT_2, seed=0))

    def mean_pairwise(A):
        M = sad_matrix(A, A)
        return M[np.triu_indices(A.shape[1], 1)].mean()

    assert s2.A_true.shape[1] == 8
    assert mean_pairwise(s2.A_true) < mean_pairwise(s1.A_true)


def test_scene_roundtrip(tmp_path, library):
    scene = generate_scene(library, SceneSpec(seed=2, snr_db=30.0, grid=(16, 16), block=4, lpf=3))
    save_scene(scene, tmp_path)
    back = load_scene(tmp_path)
    np.testing.assert_array_equal(np.asarray(back.X), np.asarray(scene.X))
    np.testing.assert_array_equal(back.S_true, scene.S_true)
    assert back.spec == scene.spec
    assert back.achieved_snr_db == scene.achieved_snr_db
