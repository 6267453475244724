"""Smoke tests for the Python bindings; runs under plain `python3`."""

import math

import numpy as np

import thermalnet as tn


def test_param_counts():
    vgg = tn.build_vgg19(128, 1)
    counts = vgg.count_params()
    assert counts["per_layer"][0][2] == 20024384
    assert counts["per_layer"][2][2] == 2097408
    assert counts["per_layer"][4][2] == 257

    res = tn.build_resnet50(128, 1)
    counts = res.count_params()
    assert counts["per_layer"][0][2] == 23587712
    assert counts["total"] == counts["trainable"] + counts["non_trainable"]
    assert counts["non_trainable"] == 53120
    assert res.conv_census() == (53, 49)
    assert "(None, 4, 4, 2048)" in res.summary()


def test_denoising_improves_psnr():
    y, x = np.mgrid[0:48, 0:48]
    clean = 0.15 + 0.7 * np.exp(-((x - 23.5) ** 2 + (y - 23.5) ** 2) / 96.0)
    rng = np.random.default_rng(7)
    noisy = np.clip(clean + 0.1 * rng.standard_normal(clean.shape), 0.0, 1.0)

    denoised = tn.denoise_image(noisy, tn.KalmanConfig())
    assert tn.psnr(denoised, clean) > tn.psnr(noisy, clean)

    constant = np.full((8, 8), 0.42)
    assert np.allclose(tn.denoise_image(constant, tn.KalmanConfig()), constant)

    x1, p1 = tn.kalman_step(0.0, 1.0, 1.0, 0.0, 1.0)
    assert math.isclose(x1, 0.5) and math.isclose(p1, 0.5)


def test_pgm_round_trip():
    img = np.round(np.random.default_rng(3).random((6, 9)) * 255) / 255
    back = tn.decode_pgm(tn.encode_pgm(img))
    assert np.allclose(back, img)


def test_training_and_evaluation():
    train_ds = tn.synth_thermal(2, 12, 16, 0.03, 11)
    test_ds = tn.synth_thermal(2, 4, 16, 0.03, 12)
    assert len(train_ds) == 24
    assert train_ds.images.shape == (24, 16, 16)

    model = tn.build_small_cnn(16, 2)
    cfg = tn.TrainConfig()
    cfg.epochs = 15
    cfg.batch_size = 8
    cfg.learning_rate = 0.02
    cfg.seed = 5
    history = tn.train(model, train_ds, test_ds, cfg)
    assert len(history) == 15
    assert history[-1]["train_loss"] < history[0]["train_loss"]

    report = tn.evaluate(model, test_ds, train_ds.class_names)
    assert report["support"] == len(test_ds)
    for row in report["per_class"]:
        p, r = row["precision"], row["recall"]
        expected = 2 * p * r / (p + r) if p + r > 0 else 0.0
        assert row["f1_score"] == expected

    out = model.forward(np.random.default_rng(1).random((2, 1, 16, 16)))
    assert out.shape == (2, 2)
    assert np.all(np.isfinite(out))


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} smoke tests passed (thermalnet {tn.__version__})")


if __name__ == "__main__":
    main()
