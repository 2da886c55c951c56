import numpy as np
import pytest

from kernelbandits.kernels import KernelConfig, rbf
from kernelbandits.posterior import (
    EPS_CLAMP,
    BetaParams,
    beta_params,
    beta_params_from_kvec,
    kernel_mass,
    thompson_draw,
)
from kernelbandits.store import ReferenceStore

CFG = KernelConfig(sigma=1.0)


def test_kernel_mass_empty_store():
    store = ReferenceStore(dim=2, kernel_config=CFG)
    assert kernel_mass(np.zeros(2), store) == 0.0


def test_kernel_mass_coincident():
    store = ReferenceStore.from_samples([[1.0]] * 3, [1, 0, 1], CFG)
    assert kernel_mass([1.0], store) == pytest.approx(3.0, rel=1e-12)


def test_kernel_mass_matches_direct_sum():
    rng = np.random.default_rng(0)
    emb = rng.uniform(size=(25, 3))
    store = ReferenceStore.from_samples(emb, np.zeros(25), CFG)
    q = rng.uniform(size=3)
    direct = sum(rbf(q, s, CFG) for s in emb)
    assert kernel_mass(q, store) == pytest.approx(direct, rel=1e-12)
    mask = [0, 3, 7]
    direct_masked = sum(rbf(q, emb[i], CFG) for i in mask)
    assert kernel_mass(q, store, mask=mask) == pytest.approx(direct_masked, rel=1e-12)


def test_beta_params_hand_computed():
    # three coincident samples with rewards {1,1,0}: eta=3, mean=2/3
    store = ReferenceStore.from_samples([[0.0, 0.0]] * 3, [1, 1, 0], CFG)
    p = beta_params([0.0, 0.0], store)
    assert p.eta == pytest.approx(3.0, rel=1e-9)
    assert p.alpha == pytest.approx(2.0, rel=1e-9)
    assert p.beta == pytest.approx(1.0, rel=1e-9)


def test_beta_params_empty_store_uniform_prior():
    store = ReferenceStore(dim=1, kernel_config=CFG)
    p = beta_params([0.0], store)
    assert (p.alpha, p.beta, p.eta) == (1.0, 1.0, 0.0)


def test_beta_params_all_ones_clamps_beta():
    store = ReferenceStore.from_samples([[0.0]] * 4, [1, 1, 1, 1], CFG)
    p = beta_params([0.0], store)
    assert p.alpha == pytest.approx(4.0, rel=1e-9)
    assert p.beta == EPS_CLAMP


def test_posterior_identities_over_random_stores():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(20, 60))
        emb = rng.uniform(size=(n, 2))
        rew = rng.integers(0, 2, size=n).astype(float)
        store = ReferenceStore.from_samples(emb, rew, CFG)
        q = rng.uniform(-0.5, 1.5, size=2)
        p = beta_params(q, store)
        eta = kernel_mass(q, store)
        if eta >= 1e-8:
            assert abs(p.mean - store.iwkr(q)) < 1e-9
            assert abs(p.alpha + p.beta - eta) < 1e-9


def test_beta_params_from_kvec_matches():
    rng = np.random.default_rng(2)
    emb = rng.uniform(size=(15, 2))
    store = ReferenceStore.from_samples(emb, rng.integers(0, 2, 15).astype(float), CFG)
    q = rng.uniform(size=2)
    a = beta_params(q, store)
    b = beta_params_from_kvec(store.kernel_vector(q), store)
    assert (a.alpha, a.beta, a.eta) == (b.alpha, b.beta, b.eta)


def test_nwkr_variant():
    store = ReferenceStore.from_samples([[0.0], [0.0], [0.3]], [1, 1, 0], CFG)
    p_iw = beta_params([0.1], store, use_importance_weights=True)
    p_nw = beta_params([0.1], store, use_importance_weights=False)
    assert p_iw.eta == p_nw.eta
    assert p_iw.mean != p_nw.mean
    assert p_nw.mean == pytest.approx(store.nwkr([0.1]), rel=1e-12)


def test_thompson_draw_uniform_mean():
    rng = np.random.default_rng(3)
    draws = np.array([thompson_draw(BetaParams(1, 1, 2), rng) for _ in range(100_000)])
    assert draws.mean() == pytest.approx(0.5, abs=0.005)


def test_thompson_draw_beta21_mean():
    rng = np.random.default_rng(4)
    draws = np.array([thompson_draw(BetaParams(2, 1, 3), rng) for _ in range(100_000)])
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - 2.0 / 3.0) < 3 * se


def test_thompson_draw_degenerate_clamp():
    rng = np.random.default_rng(5)
    p = BetaParams(50.0, EPS_CLAMP, 50.0)
    draws = np.array([thompson_draw(p, rng) for _ in range(10_000)])
    assert np.mean(draws >= 0.999) > 0.99


def test_thompson_draw_deterministic_given_seed():
    a = [thompson_draw(BetaParams(2, 3, 5), np.random.default_rng(9)) for _ in range(1)]
    b = [thompson_draw(BetaParams(2, 3, 5), np.random.default_rng(9)) for _ in range(1)]
    assert a == b


def test_peakedness_increases_with_mass():
    # same mean, ten times the kernel mass: variance p(1-p)/(eta+1) shrinks
    p = 0.3
    low = BetaParams(2.0 * p, 2.0 * (1 - p), 2.0)
    high = BetaParams(20.0 * p, 20.0 * (1 - p), 20.0)
    assert high.variance < low.variance
    assert low.variance == pytest.approx(p * (1 - p) / 3.0, rel=1e-12)
