import numpy as np
import pytest

from shl.errors import InputError
from shl.segment import segment_image
from shl.trainer import TrainConfig


def halves(h=24, w=24, noise=0.0, seed=0):
    img = np.zeros((h, w, 3))
    img[:, : w // 2, 0] = 1.0
    img[:, w // 2 :, 2] = 1.0
    if noise:
        img = np.clip(img + noise * np.random.default_rng(seed).normal(size=img.shape), 0, 1)
    scrib = np.full((h, w), -1)
    scrib[h // 2, 2:5] = 1  # foreground stroke on the red half
    scrib[h // 2, w - 5 : w - 2] = 0
    truth = np.zeros((h, w), dtype=bool)
    truth[:, : w // 2] = True
    return img, scrib, truth


def test_two_halves_segmented():
    img, scrib, truth = halves()
    mask, model = segment_image(img, scrib)
    assert np.mean(mask == truth) >= 0.99
    assert model.n_bits == 5 and model.codebook.mu.shape == (2, 1, 5)


def test_noisy_halves_segmented():
    img, scrib, truth = halves(noise=0.05)
    mask, _ = segment_image(img, scrib)
    assert np.mean(mask == truth) >= 0.99


def test_full_scribbles_returned_verbatim():
    img, _, truth = halves(8, 8)
    scrib = np.where(truth, 1, 0)
    scrib[0, 0] = 0  # a deliberately wrong label is kept as given
    mask, _ = segment_image(img, scrib)
    np.testing.assert_array_equal(mask, scrib == 1)


def test_subsampling_cap():
    img, scrib, truth = halves(20, 20)
    mask, model = segment_image(img, scrib, TrainConfig(n_bits=5, seed=3), max_train=100)
    assert model.train_decision.shape[0] == 100
    assert np.mean(mask == truth) >= 0.99


def test_segment_errors():
    img, scrib, _ = halves(6, 6)
    with pytest.raises(InputError):
        segment_image(img, scrib[:5])
    with pytest.raises(InputError):
        segment_image(img[..., :2], scrib)
    with pytest.raises(InputError):
        segment_image(img, np.full((6, 6), -1))
    bad = scrib.copy()
    bad[0, 0] = 4
    with pytest.raises(InputError):
        segment_image(img, bad)
