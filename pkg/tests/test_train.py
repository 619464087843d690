import numpy as np
import pytest

from choquet.estimators import CriticConfig, estimate_ct
from choquet.measures import EmpiricalMeasure, eight_gaussians, swiss_roll
from choquet.net import ConstraintProfile, NetShape, is_feasible
from choquet.train import (
    GanConfig,
    PortfolioConfig,
    TrainLog,
    loglog_slope,
    rate_experiment,
    train_ct_gan,
    train_dominance_gan,
    train_portfolio,
    train_wgan,
)

SMALL_GAN = dict(latent=4, gen_hidden=8, gen_layers=3, critic_shape=NetShape.uniform(2, 6, 3, 2),
                 disc_shape=NetShape.uniform(2, 6, 3, 2), batch=32, critic_epochs=2)
SMALL_PORT = dict(batch=64, steps=40, critic_shape=NetShape.uniform(1, 6, 3, 2))


def test_train_log(tmp_path):
    log = TrainLog(["step", "loss"])
    log.append(step=0, loss=1.5)
    log.append(loss=0.5, step=1)
    with pytest.raises(ValueError):
        log.append(step=2)
    with pytest.raises(ValueError):
        log.append(step=2, loss=0.0, extra=1.0)
    assert len(log) == 2 and log.last() == {"step": 1.0, "loss": 0.5}
    np.testing.assert_array_equal(log.column("loss"), [1.5, 0.5])
    log.to_csv(tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text().splitlines() == ["step,loss", "0.0,1.5", "1.0,0.5"]


# -- portfolio ---------------------------------------------------------------------

def test_portfolio_config_validation():
    with pytest.raises(ValueError):
        PortfolioConfig(z_bounds=(2.0, 1.0))
    with pytest.raises(ValueError):
        PortfolioConfig(lam=-1.0)
    with pytest.raises(ValueError):
        PortfolioConfig(critic_profile=ConstraintProfile.hard(1.0))


def test_portfolio_lr_zero_keeps_z():
    res, log = train_portfolio(PortfolioConfig(lr_z=0.0, z_init=1.3, **SMALL_PORT))
    assert res.z == 1.3
    np.testing.assert_array_equal(log.column("z"), 1.3)


def test_portfolio_z_stays_in_bounds_and_critic_feasible():
    res, log = train_portfolio(PortfolioConfig(lr_z=0.2, **SMALL_PORT))
    z = log.column("z")
    assert ((z >= 1.0) & (z <= 2.0)).all()
    assert 1.0 <= res.z <= 2.0
    assert is_feasible(res.critic)
    assert res.final_vdc >= 0.0


def test_portfolio_initial_z_is_clamped():
    _, log = train_portfolio(PortfolioConfig(z_init=5.0, lr_z=0.0, **SMALL_PORT))
    assert log.column("z")[0] == 2.0


def test_portfolio_determinism():
    a = train_portfolio(PortfolioConfig(seed=3, **SMALL_PORT))[1]
    b = train_portfolio(PortfolioConfig(seed=3, **SMALL_PORT))[1]
    assert a.rows == b.rows
    c = train_portfolio(PortfolioConfig(seed=4, **SMALL_PORT))[1]
    assert a.rows != c.rows


# -- generative harnesses --------------------------------------------------------------

def test_gan_config_validation():
    with pytest.raises(ValueError):
        GanConfig(critic_epochs=0)
    with pytest.raises(ValueError):
        GanConfig(lam=-1.0)
    with pytest.raises(ValueError):
        GanConfig(gp_mode="spectral")
    with pytest.raises(ValueError):
        GanConfig(vdc_batch=0)
    with pytest.raises(ValueError):
        GanConfig(critic_profile=ConstraintProfile.hard(1.0, "unconstrained"))


def test_ct_gan_zero_epochs_leaves_generator():
    cfg = GanConfig(epochs=0, **SMALL_GAN)
    gen, log = train_ct_gan(swiss_roll(seed=0), cfg)
    start = cfg.initial_generator()
    assert len(log) == 0
    for p, q in zip(gen.params, start.params):
        np.testing.assert_array_equal(p, q)


def test_ct_gan_runs_and_is_deterministic():
    cfg = GanConfig(epochs=5, **SMALL_GAN)
    _, a = train_ct_gan(swiss_roll(seed=0), cfg)
    _, b = train_ct_gan(swiss_roll(seed=0), cfg)
    assert len(a) == 5 and a.rows == b.rows
    np.testing.assert_allclose(a.column("ct_estimate"), a.column("loss_ct1") + a.column("loss_ct2"))


def test_ct_gan_dimension_mismatch():
    with pytest.raises(ValueError):
        train_ct_gan(eight_gaussians(), GanConfig(critic_shape=NetShape.uniform(3, 4, 3, 2),
                                                  disc_shape=NetShape.uniform(3, 4, 3, 2)))


@pytest.mark.parametrize("gp_mode", ["clip", "penalty"])
def test_zero_weight_dominance_matches_wgan(gp_mode):
    cfg = GanConfig(epochs=6, lam=0.0, gp_mode=gp_mode, **SMALL_GAN)
    target = lambda: eight_gaussians(seed=1)
    baseline = GanConfig(epochs=0, seed=9, **SMALL_GAN).initial_generator()
    g_w, log_w = train_wgan(target(), cfg)
    g_d, log_d = train_dominance_gan(target(), baseline, cfg)
    for p, q in zip(g_w.params, g_d.params):
        np.testing.assert_array_equal(p, q)
    np.testing.assert_array_equal(log_w.column("loss_wgan"), log_d.column("loss_wgan"))


@pytest.mark.parametrize("vdc_batch", [None, 64])
def test_dominance_penalty_nonnegative(vdc_batch):
    cfg = GanConfig(epochs=6, lam=10.0, vdc_batch=vdc_batch, **SMALL_GAN)
    baseline = GanConfig(epochs=0, seed=9, **SMALL_GAN).initial_generator()
    _, log = train_dominance_gan(eight_gaussians(seed=1), baseline, cfg)
    assert (log.column("vdc") >= -1e-9).all()
    np.testing.assert_allclose(log.column("loss_total"), -log.column("loss_wgan") + 10.0 * log.column("vdc"))


def test_dominance_baseline_mismatch():
    cfg = GanConfig(**SMALL_GAN)
    wrong = GanConfig(**{**SMALL_GAN, "latent": 5}).initial_generator()
    with pytest.raises(ValueError):
        train_dominance_gan(eight_gaussians(), wrong, cfg)


def test_gradient_penalty_reported():
    _, log = train_wgan(eight_gaussians(seed=1), GanConfig(epochs=3, gp_mode="penalty", **SMALL_GAN))
    assert (log.column("gp") > 0).all()
    _, log = train_wgan(eight_gaussians(seed=1), GanConfig(epochs=3, gp_mode="clip", **SMALL_GAN))
    assert (log.column("gp") == 0).all()


# -- rates -------------------------------------------------------------------------------

def test_loglog_slope():
    n = np.array([10, 100, 1000])
    assert loglog_slope(n, 3.0 / np.sqrt(n)) == pytest.approx(-0.5)


def test_same_sample_gives_zero():
    ref = EmpiricalMeasure.uniform(np.random.default_rng(0).uniform(-1, 1, size=(256, 2)))
    assert estimate_ct(ref, ref, CriticConfig.default(2, inner_steps=20)).value == 0.0


def test_rate_experiment_small():
    cfg = CriticConfig.default(2, inner_steps=20)
    r = rate_experiment(NetShape.uniform(2, 4, 3, 2), [16, 64], trials=2, reference_size=512, critic=cfg)
    assert r.estimates.shape == (2, 2) and (r.estimates >= 0).all()
    assert np.isfinite(r.slope)
    with pytest.raises(ValueError):
        rate_experiment(NetShape.uniform(2, 4, 3, 2), [64, 16])
    with pytest.raises(ValueError):
        rate_experiment(NetShape.uniform(2, 4, 3, 2), [16], trials=0)
