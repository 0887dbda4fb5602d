import math

import pytest

import peerloss as pl


def test_closed_forms():
    assert pl.alpha_star(0.5, pl.make_noise_model(0.2, 0.3)) == 1.0
    assert abs(pl.alpha_star(0.6, pl.make_noise_model(0.3, 0.4)) - 2.5) <= 1e-12
    d = pl.delta_matrix(0.6, pl.make_noise_model(0.2, 0.3), pl.make_noise_model(0.3, 0.4))
    assert abs(d[0][0] - 0.036) <= 1e-12
    assert pl.sign_matrix(d) == [[1, 0], [0, 1]]
    assert pl.noisy_prior(0.5, pl.make_noise_model(0.1, 0.1)) == pytest.approx(0.5)


def test_errors_carry_codes():
    with pytest.raises(pl.PeerlossError) as info:
        pl.make_noise_model(0.5, 0.5)
    assert info.value.code == "SumNotLessThanOne"
    with pytest.raises(ValueError):
        pl.draw_pairing(2, 1)


def test_peer_loss_batch():
    pairing = pl.draw_pairing(6, 3)
    assert len(pairing) == 6
    for i in range(6):
        assert pairing.n1[i] != pairing.n2[i] and i not in (pairing.n1[i], pairing.n2[i])
    scores = [0.5, -1.0, 2.0, 0.1, -0.3, 1.2]
    labels = [1, -1, -1, 1, 1, -1]
    out = pl.peer_loss_batch(scores, labels, pairing, alpha=1.0)

    def logistic(t, y):
        return math.log1p(math.exp(-t * y))

    for i in range(6):
        expected = logistic(scores[i], labels[i]) - logistic(scores[pairing.n1[i]], labels[pairing.n2[i]])
        assert out["per_sample"][i] == pytest.approx(expected)
    assert out["mean"] == pytest.approx(sum(out["per_sample"]) / 6)


def test_surrogate_unbiased():
    nm = pl.make_noise_model(0.2, 0.3)
    for t in (-2.0, 0.0, 1.5):
        for y, ey in ((1, 0.3), (-1, 0.2)):
            v = (1 - ey) * pl.surrogate_loss(pl.BaseLoss.logistic, t, y, nm)[0] + ey * pl.surrogate_loss(
                pl.BaseLoss.logistic, t, -y, nm
            )[0]
            assert v == pytest.approx(pl.eval_base(pl.BaseLoss.logistic, t, y)[0], abs=1e-12)


def test_data_pipeline(tmp_path):
    ds = pl.split(pl.flip_labels(pl.gen_circles(200, 0.5, 1.0, 0.05, 1), pl.make_noise_model(0.2, 0.2), 2),
                  [0.6, 0.2, 0.2], 3)
    assert ds.n == 200 and ds.d == 2
    assert sorted(set(ds.split_tags)) == ["test", "train", "val"]
    flips = sum(a != b for a, b in zip(ds.clean, ds.noisy))
    assert 10 < flips < 80
    path = tmp_path / "circles.csv"
    pl.write_csv(str(path), ds)
    back = pl.load_csv(str(path), noisy_column="noisy_label", split_column="split")
    assert back.features == ds.features
    assert back.noisy == ds.noisy and back.split_tags == ds.split_tags
    eq = pl.equalize_prior(ds, "noisy", 4)
    assert sum(1 for y in eq.noisy if y > 0) == sum(1 for y in eq.noisy if y < 0)


def test_classifier_and_suites():
    c = pl.init_classifier("mlp", 2, hidden=4, seed=1)
    assert len(c.params) == 2 * 4 + 4 + 4 + 1
    assert c.predict([0.0, 0.0]) in (-1, 1)
    reports = pl.run_suite("lemma2", 1, 5)
    assert reports[0]["pass"] and reports[0]["instances"] == 5


def test_dispatch():
    code, out, _ = pl.dispatch(["alpha-star", "--p", "0.5", "--e-minus", "0.1", "--e-plus", "0.1"])
    assert code == 0 and out.strip() == "1.0"
    code, _, err = pl.dispatch(["train"])
    assert code == 2 and "--config" in err
