import hashlib

import numpy as np
import pytest

import hdcyclegan as hd


def test_phantom_is_deterministic():
    a = hd.generate_phantom(3, height=32, width=48)
    b = hd.generate_phantom(3, height=32, width=48)
    assert a["hn"].shape == (32, 48)
    assert np.array_equal(a["hn"], b["hn"])
    assert len(a["top_boundary"]) == 48
    assert a["hn"].min() >= 0.0 and a["hn"].max() <= 1.0


def test_psnr_matches_numpy():
    rng = np.random.default_rng(0)
    x, y = rng.random((16, 16)), rng.random((16, 16))
    expected = 10 * np.log10(1.0 / np.mean((x - y) ** 2))
    assert hd.psnr(x, y) == pytest.approx(expected, rel=1e-12)
    assert hd.ssim(x, x) == pytest.approx(1.0)


def test_registration_finds_a_circular_shift():
    rng = np.random.default_rng(1)
    ref = rng.random((32, 32))
    dy, dx, conf = hd.register_translation(ref, np.roll(ref, (4, -3), axis=(0, 1)))
    assert (dy, dx) == (4, -3)
    assert conf > 1.0


def test_masks_and_contrast_metrics():
    s = hd.generate_phantom(5)
    retina, signal, background = hd.extract_masks(s["ln"])
    assert not np.any(signal & background)
    assert hd.cnr(s["ln"], signal, background) > 0
    assert hd.msr(s["ln"], signal) > 0
    with pytest.raises(hd.MaskExtractionError):
        hd.extract_masks(np.full((32, 32), 0.3))


def test_baselines_run_and_improve_psnr():
    s = hd.generate_phantom(8)
    assert "bm3d" in hd.baseline_names()
    out = hd.baseline("median", s["hn"], '{"median": {"window": 5}}')
    assert out.shape == s["hn"].shape
    assert hd.psnr(out, s["clean"]) > hd.psnr(s["hn"], s["clean"])
    with pytest.raises(hd.ConfigError):
        hd.baseline("sharpen", s["hn"])
    with pytest.raises(ValueError):
        hd.baseline("median", s["hn"], '{"median": {"window": 4}}')


def test_sha256_and_orders():
    assert hd.sha256_hex(b"abc") == hashlib.sha256(b"abc").hexdigest()
    orders = hd.presentation_orders(1, 5, 3)
    assert len(orders) == 5
    assert all(sorted(o) == [0, 1, 2] for o in orders)


def test_bad_checkpoint_is_a_data_error(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"nope")
    with pytest.raises(hd.DataError):
        hd.load_checkpoint(str(p))
