"""Smoke test for the `lik` extension module.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o target/wheels
    pip install --force-reinstall target/wheels/lik-*.whl
"""

import math

import lik


def main():
    model = lik.LatentModel(d=30, k=5, sigma_xi=1.0, seed=1)
    features, y = model.generate(400)
    assert len(features) == 5 and len(y) == 400 and len(y[0]) == 30
    test_features, test_y = model.generate(200, start=400)

    k_hat, rank, delta = lik.estimate_k(y)
    assert rank >= 1 and delta > 0
    err = lik.gram_error(k_hat, model.gram())
    assert math.isfinite(err)
    eig = lik.eigenvalues(model.gram())
    assert eig == sorted(eig, reverse=True)

    boosted = lik.boost(y, features, k_hat, eta=0.1, rounds=20)
    mse = boosted.train_mse
    assert len(mse) == 21 and all(b <= a + 1e-9 for a, b in zip(mse, mse[1:]))
    yhat = boosted.predict(test_features, k_hat)
    report = lik.evaluate(test_y, yhat)
    assert report["corr"] > 0, report

    g = lik.estimate_g(features[:1], y, k_hat, ell=5)
    assert len(g.mu) == 5 and len(g.n_used) == 5
    yhat_np = g.predict(test_features[:1], k_hat)

    blend = lik.consolidate([yhat, yhat_np], [report["t_stat"], 1.0])
    assert len(blend) == 200

    try:
        lik.estimate_k(y, delta=50.0)
    except lik.AlgorithmError as e:
        assert str(e).startswith("gap-not-found"), e
    else:
        raise AssertionError("expected gap-not-found")
    try:
        lik.gram_error([[1.0, 2.0], [3.0]], [[1.0]])
    except ValueError as e:
        assert "invalid-dimension" in str(e), e
    else:
        raise AssertionError("expected ValueError")

    print(f"ok: rank_star={rank} gram_error={err:.3e} corr={report['corr']:.4f} {boosted!r} {g!r}")


if __name__ == "__main__":
    main()
