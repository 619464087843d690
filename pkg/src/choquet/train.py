"""Training harnesses: dominance-constrained portfolio, CT-distance generative
modeling, dominance-constrained WGAN, and the empirical rate experiment.

Every harness returns a ``TrainLog`` with one record per outer (generator or
``z``) step.  Random streams are split with ``child_seeds`` so that adding a
component (for instance the Choquet critic of the dominance GAN) never shifts
the draws seen by the others.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import CriticConfig, estimate_ct, estimate_vdc
from .generator import ResidualGenerator, init_generator
from .measures import (
    EmpiricalMeasure,
    Sampler,
    benchmark_staircase,
    child_seeds,
    latent_gaussian,
)
from .net import (
    ConstraintProfile,
    MaxoutNet,
    NetShape,
    backward_batch,
    forward_batch,
    init_params,
    input_gradient_param_grad,
)
from .opt import adam_init, adam_step, clamp_scalar, projected_update


class TrainLog:
    """Append-only table of per-step records with a fixed column order."""

    def __init__(self, columns):
        self.columns = tuple(columns)
        self.rows: list[tuple[float, ...]] = []

    def append(self, **values) -> None:
        if set(values) != set(self.columns):
            missing = set(self.columns) - set(values)
            extra = set(values) - set(self.columns)
            raise ValueError(f"log record mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        self.rows.append(tuple(float(values[c]) for c in self.columns))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def last(self) -> dict[str, float]:
        return dict(zip(self.columns, self.rows[-1])) if self.rows else {}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(v) for v in r])


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _seeds(seed: int, n: int) -> list[int]:
    return [s % 2**31 for s in child_seeds(seed, n)]


def _uniform(X) -> np.ndarray:
    return np.full(len(X), 1.0 / len(X))


def _critic_step(critic: MaxoutNet, state, X_minus, X_plus, reg: float):
    """One projected Adam step ascending ``E_minus[u] - E_plus[u] - reg * (E_minus[u^2] + E_plus[u^2])``.

    Returns ``(critic, state, objective)`` with the objective measured before
    the step.
    """
    vm, tm = forward_batch(critic, X_minus)
    vp, tp = forward_batch(critic, X_plus)
    wm, wp = _uniform(X_minus), _uniform(X_plus)
    obj = float(wm @ vm - wp @ vp)
    gm, _ = backward_batch(critic, tm, -wm + 2.0 * reg * wm * vm)
    gp, _ = backward_batch(critic, tp, wp + 2.0 * reg * wp * vp)
    critic, state = projected_update(critic, state, [a + b for a, b in zip(gm, gp)])
    return critic, state, obj


# -- portfolio ----------------------------------------------------------------

@dataclass(frozen=True)
class PortfolioConfig:
    """Portfolio ``z * xi`` against the staircase benchmark, ``xi ~ U[0, 1]``."""

    lam: float = 1.0
    z_init: float = 1.0
    z_bounds: tuple[float, float] = (1.0, 2.0)
    lr_z: float = 1e-3
    lr_critic: float = 1e-3
    batch: int = 512
    steps: int = 5000
    critic_steps: int = 1
    critic_shape: NetShape = field(default_factory=lambda: NetShape.uniform(1, 32, 3, 4))
    critic_profile: ConstraintProfile = field(
        default_factory=lambda: ConstraintProfile.hard(1.0, "input_convex_decreasing"))
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.z_bounds
        if lo > hi:
            raise ValueError(f"z bounds out of order: {self.z_bounds}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.batch < 1 or self.steps < 0 or self.critic_steps < 1:
            raise ValueError("batch and critic_steps must be >= 1, steps >= 0")
        if self.critic_profile.mode != "input_convex_decreasing":
            raise ValueError("portfolio critic must be input_convex_decreasing")
        if self.critic_shape.d != 1:
            raise ValueError("portfolio critic takes scalar returns")


@dataclass
class PortfolioResult:
    z: float
    mean_return: float
    benchmark_mean: float
    final_vdc: float
    critic: MaxoutNet


def train_portfolio(cfg: PortfolioConfig) -> tuple[PortfolioResult, TrainLog]:
    """Maximize ``E[z xi]`` subject to second-order dominance of the benchmark.

    The critic is a convex decreasing ICMN ``u``; it ascends
    ``E[u(z xi)] - E[u(benchmark(xi))]``, the surrogate VDC of the benchmark
    against the portfolio.  ``z`` descends ``-E[z xi] + lam * VDC`` and is
    clamped to ``z_bounds`` after every step.
    """
    s_init, s_data, s_eval = _seeds(cfg.seed, 3)
    rng = _philox(s_data)
    critic = init_params(cfg.critic_shape, cfg.critic_profile, s_init)
    c_state = adam_init(critic.params, lr=cfg.lr_critic)
    z = clamp_scalar(cfg.z_init, *cfg.z_bounds)
    z_state = adam_init([np.zeros(1)], lr=cfg.lr_z)
    reg = cfg.critic_profile.reg_weight if cfg.critic_profile.lipschitz == "soft" else 0.0
    log = TrainLog(["step", "z", "mean_return", "benchmark_mean", "vdc"])

    for step in range(cfg.steps):
        xi = rng.uniform(size=(cfg.batch, 1))
        bench = benchmark_staircase(xi)
        for _ in range(cfg.critic_steps):
            critic, c_state, _ = _critic_step(critic, c_state, z * xi, bench, reg)
        v, tr = forward_batch(critic, z * xi)
        vb = critic(bench)
        w = _uniform(xi)
        vdc = float(w @ v - w @ vb)
        # d/dz of E[u(z xi)] is E[u'(z xi) xi]
        _, du = backward_batch(critic, tr, w, need_params=False)
        grad_z = -float(w @ xi[:, 0]) + cfg.lam * float(du[:, 0] @ xi[:, 0])
        log.append(step=step, z=z, mean_return=z * float(w @ xi[:, 0]),
                   benchmark_mean=float(w @ bench[:, 0]), vdc=vdc)
        z_state, (z_arr,) = adam_step(z_state, [np.array([z])], [np.array([grad_z])])
        z = clamp_scalar(float(z_arr[0]), *cfg.z_bounds)

    rng_eval = _philox(s_eval)
    xi = rng_eval.uniform(size=(cfg.batch, 1))
    bench = benchmark_staircase(xi)
    check = estimate_vdc(
        EmpiricalMeasure.uniform(bench), EmpiricalMeasure.uniform(z * xi),
        CriticConfig.default(1, profile=cfg.critic_profile, seed=s_eval),
    )
    result = PortfolioResult(z, z * float(xi.mean()), float(bench.mean()), check.value, critic)
    return result, log


# -- generative models ----------------------------------------------------------

@dataclass(frozen=True)
class GanConfig:
    """Shared configuration for the 2D generative harnesses.

    ``critic_*`` configures the ICMN critics (the two CT critics, or the
    Choquet critic of the dominance GAN); ``disc_*`` the unconstrained WGAN
    discriminator.  ``gp_mode`` is ``"clip"`` (hard norm projection of the
    discriminator) or ``"penalty"`` (gradient penalty on interpolates).
    ``vdc_batch`` sets the latent batch of the dominance term; ``None``
    reuses the WGAN batch.
    """

    latent: int = 32
    gen_hidden: int = 32
    gen_layers: int = 10
    gen_k: int = 2
    critic_shape: NetShape = field(default_factory=lambda: NetShape.uniform(2, 32, 5, 2))
    critic_profile: ConstraintProfile = field(default_factory=lambda: ConstraintProfile.hard(1.0))
    disc_shape: NetShape = field(default_factory=lambda: NetShape.uniform(2, 32, 3, 4))
    disc_radius: float = 1.0
    lam: float = 10.0
    lam_gp: float = 10.0
    lam_reg: float = 10.0
    lr_gen: float = 5e-4
    lr_critic: float = 1e-4
    lr_disc: float = 1e-4
    epochs: int = 2000
    critic_epochs: int = 5
    batch: int = 512
    gp_mode: str = "clip"
    vdc_batch: int | None = None
    eval_samples: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.critic_epochs < 1:
            raise ValueError("critic_epochs must be >= 1")
        if min(self.lam, self.lam_gp, self.lam_reg) < 0:
            raise ValueError("lam, lam_gp and lam_reg must be >= 0")
        if self.gp_mode not in ("clip", "penalty"):
            raise ValueError(f"gp_mode must be 'clip' or 'penalty', got {self.gp_mode!r}")
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be >= 0 and batch >= 1")
        if self.vdc_batch is not None and self.vdc_batch < 1:
            raise ValueError("vdc_batch must be >= 1")
        if not self.critic_profile.convex:
            raise ValueError("critic profile must be input convex")
        if self.critic_shape.d != self.disc_shape.d:
            raise ValueError("critic and discriminator input dimensions differ")

    def generator(self, seed: int) -> ResidualGenerator:
        return init_generator(self.latent, self.gen_hidden, self.critic_shape.d,
                              self.gen_layers, self.gen_k, seed)

    def initial_generator(self) -> ResidualGenerator:
        """The generator every harness starts from when none is passed."""
        return self.generator(_seeds(self.seed, 1)[0])


def _ct_estimate(gen: ResidualGenerator, target: EmpiricalMeasure, latent: np.ndarray,
                 cfg: CriticConfig) -> float:
    return estimate_ct(EmpiricalMeasure.uniform(gen(latent)), target, cfg).value


def train_ct_gan(target: Sampler, cfg: GanConfig, generator: ResidualGenerator | None = None,
                 eval_cfg: CriticConfig | None = None) -> tuple[ResidualGenerator, TrainLog]:
    """Fit a generator by descending the surrogate CT distance to ``target``.

    Critic 1 ascends ``E_target[u1] - E_gen[u1]`` and critic 2 ascends
    ``E_gen[u2] - E_target[u2]``, ``critic_epochs`` projected steps each per
    generator step.  The generator descends the sum of both objectives.
    ``ct_estimate`` in the log is the sum of the two critic objectives on
    the current batch.
    """
    if target.d != cfg.critic_shape.d:
        raise ValueError(f"target has d={target.d}, critics expect d={cfg.critic_shape.d}")
    _, s_c1, s_c2, s_lat = _seeds(cfg.seed, 4)
    gen = generator.copy() if generator is not None else cfg.initial_generator()
    latent = latent_gaussian(cfg.latent, s_lat)
    u1 = init_params(cfg.critic_shape, cfg.critic_profile, s_c1)
    u2 = init_params(cfg.critic_shape, cfg.critic_profile, s_c2)
    st1 = adam_init(u1.params, lr=cfg.lr_critic)
    st2 = adam_init(u2.params, lr=cfg.lr_critic)
    g_state = adam_init(gen.params, lr=cfg.lr_gen)
    reg = cfg.critic_profile.reg_weight if cfg.critic_profile.lipschitz == "soft" else 0.0
    log = TrainLog(["step", "loss_ct1", "loss_ct2", "ct_estimate"])

    for step in range(cfg.epochs):
        X = target.draw(cfg.batch)
        Z = latent.draw(cfg.batch)
        G, gtr = gen.forward(Z)
        for _ in range(cfg.critic_epochs):
            u1, st1, l1 = _critic_step(u1, st1, X, G, reg)
            u2, st2, l2 = _critic_step(u2, st2, G, X, reg)
        w = _uniform(Z)
        v1, t1 = forward_batch(u1, G)
        v2, t2 = forward_batch(u2, G)
        l1 = float(w @ u1(X) - w @ v1)
        l2 = float(w @ v2 - w @ u2(X))
        # d/dG of  (E_X u1 - E_G u1) + (E_G u2 - E_X u2)
        _, d1 = backward_batch(u1, t1, -w, need_params=False)
        _, d2 = backward_batch(u2, t2, w, need_params=False)
        log.append(step=step, loss_ct1=l1, loss_ct2=l2, ct_estimate=l1 + l2)
        g_state, params = adam_step(g_state, gen.params, gen.backward(gtr, d1 + d2))
        gen = gen.with_params(params)
    return gen, log


def _disc_profile(cfg: GanConfig) -> ConstraintProfile:
    if cfg.gp_mode == "clip":
        return ConstraintProfile.hard(cfg.disc_radius, "unconstrained")
    return ConstraintProfile.soft(0.0, "unconstrained")


def _disc_step(disc: MaxoutNet, state, X, G, cfg: GanConfig, rng: np.random.Generator):
    """Discriminator descent on ``E[f(G)] - E[f(X)] (+ lam_gp * GP)``."""
    w = _uniform(X)
    vx, tx = forward_batch(disc, X)
    vg, tg = forward_batch(disc, G)
    loss = float(w @ vg - w @ vx)
    gx, _ = backward_batch(disc, tx, -w)
    gg, _ = backward_batch(disc, tg, w)
    grads = [a + b for a, b in zip(gx, gg)]
    gp = 0.0
    if cfg.gp_mode == "penalty":
        t = rng.uniform(size=(len(X), 1))
        H = t * G + (1.0 - t) * X
        _, th = forward_batch(disc, H)
        _, D = backward_batch(disc, th, np.ones(len(H)), need_params=False)
        norms = np.linalg.norm(D, axis=1)
        gp = float(w @ (norms - 1.0) ** 2)
        safe = np.where(norms > 0, norms, 1.0)
        V = (2.0 * w * (norms - 1.0) / safe)[:, None] * D
        grads = [a + cfg.lam_gp * b for a, b in zip(grads, input_gradient_param_grad(disc, th, V))]
    disc, state = projected_update(disc, state, grads)
    return disc, state, loss, gp


def _wgan_parts(cfg: GanConfig, target: Sampler, generator: ResidualGenerator | None):
    if target.d != cfg.disc_shape.d:
        raise ValueError(f"target has d={target.d}, discriminator expects d={cfg.disc_shape.d}")
    _, s_disc, s_lat, s_gp, s_choq = _seeds(cfg.seed, 5)
    gen = generator.copy() if generator is not None else cfg.initial_generator()
    disc = init_params(cfg.disc_shape, _disc_profile(cfg), s_disc)
    return gen, disc, latent_gaussian(cfg.latent, s_lat), _philox(s_gp), s_choq


def train_wgan(target: Sampler, cfg: GanConfig,
               generator: ResidualGenerator | None = None) -> tuple[ResidualGenerator, TrainLog]:
    """Plain WGAN: the discriminator takes ``critic_epochs`` steps per generator step."""
    gen, disc, latent, gp_rng, _ = _wgan_parts(cfg, target, generator)
    d_state = adam_init(disc.params, lr=cfg.lr_disc)
    g_state = adam_init(gen.params, lr=cfg.lr_gen)
    log = TrainLog(["step", "loss_wgan", "gp"])
    for step in range(cfg.epochs):
        X = target.draw(cfg.batch)
        Z = latent.draw(cfg.batch)
        G, gtr = gen.forward(Z)
        for _ in range(cfg.critic_epochs):
            disc, d_state, loss, gp = _disc_step(disc, d_state, X, G, cfg, gp_rng)
        vg, tg = forward_batch(disc, G)
        w = _uniform(Z)
        _, dG = backward_batch(disc, tg, -w, need_params=False)
        log.append(step=step, loss_wgan=float(w @ vg - w @ disc(X)), gp=gp)
        g_state, params = adam_step(g_state, gen.params, gen.backward(gtr, dG))
        gen = gen.with_params(params)
    return gen, log


def _linear_penalty(profile: ConstraintProfile, minus: np.ndarray, plus: np.ndarray):
    """Best linear member of a hard class for ``E_minus[u] - E_plus[u]``: ``(w, value)``."""
    if profile.lipschitz != "hard":
        return np.zeros(minus.shape[1]), 0.0
    gap = minus.mean(axis=0) - plus.mean(axis=0)
    if profile.mode == "input_convex_decreasing":
        gap = np.minimum(gap, 0.0)
    n = float(np.linalg.norm(gap))
    if n == 0.0:
        return gap, 0.0
    return gap * (profile.radius / n), profile.radius * n


def train_dominance_gan(target: Sampler, baseline: ResidualGenerator, cfg: GanConfig,
                        generator: ResidualGenerator | None = None
                        ) -> tuple[ResidualGenerator, TrainLog]:
    """WGAN with a Choquet critic enforcing dominance over ``baseline``.

    The Choquet critic ascends ``E[u(g0(y))] - E[u(g(y))]`` (the surrogate
    VDC of the generator against the baseline on shared latents) minus
    ``lam_reg`` times the mean of ``u^2`` on both sample sets.  The generator
    descends the WGAN loss plus ``lam`` times the VDC penalty.  The penalty
    is the best of three members of the critic class: the trained critic,
    the zero function and (in hard mode) the best linear function, which
    has a closed form.  It is never negative, a critic that underperforms
    zero exerts no force, and a mean gap is penalized even when the trained
    critic has collapsed.  The WGAN part consumes exactly the random streams of
    ``train_wgan``, so ``lam = 0`` reproduces its trajectory.
    """
    if baseline.latent != cfg.latent or baseline.out_dim != cfg.critic_shape.d:
        raise ValueError(
            f"baseline maps R^{baseline.latent} -> R^{baseline.out_dim}; "
            f"expected R^{cfg.latent} -> R^{cfg.critic_shape.d}"
        )
    gen, disc, latent, gp_rng, s_choq = _wgan_parts(cfg, target, generator)
    s_u, s_zv = _seeds(s_choq, 2)
    u = init_params(cfg.critic_shape, cfg.critic_profile, s_u)
    vdc_latent = latent_gaussian(cfg.latent, s_zv) if cfg.vdc_batch is not None else None
    d_state = adam_init(disc.params, lr=cfg.lr_disc)
    u_state = adam_init(u.params, lr=cfg.lr_critic)
    g_state = adam_init(gen.params, lr=cfg.lr_gen)
    log = TrainLog(["step", "loss_wgan", "gp", "vdc", "loss_total"])
    for step in range(cfg.epochs):
        X = target.draw(cfg.batch)
        Z = latent.draw(cfg.batch)
        G, gtr = gen.forward(Z)
        if vdc_latent is None:
            Gv, vtr = G, gtr
            B = baseline(Z)
        else:
            Zv = vdc_latent.draw(cfg.vdc_batch)
            Gv, vtr = gen.forward(Zv)
            B = baseline(Zv)
        for _ in range(cfg.critic_epochs):
            disc, d_state, loss, gp = _disc_step(disc, d_state, X, G, cfg, gp_rng)
            u, u_state, _ = _critic_step(u, u_state, B, Gv, cfg.lam_reg)
        w = _uniform(Z)
        wv = _uniform(Gv)
        vg, tg = forward_batch(disc, G)
        _, dG = backward_batch(disc, tg, -w, need_params=False)
        ug, tu = forward_batch(u, Gv)
        vdc = float(wv @ u(B) - wv @ ug)
        lin_w, lin_vdc = _linear_penalty(cfg.critic_profile, B, Gv)
        loss_wgan = float(w @ vg - w @ disc(X))
        penalty = max(vdc, lin_vdc, 0.0)
        log.append(step=step, loss_wgan=loss_wgan, gp=gp, vdc=penalty,
                   loss_total=-loss_wgan + cfg.lam * penalty)
        grads = gen.backward(gtr, dG)
        if penalty > 0.0 and cfg.lam > 0.0:
            if vdc >= lin_vdc:
                _, dU = backward_batch(u, tu, -wv, need_params=False)
            else:
                dU = -np.outer(wv, lin_w)
            grads = [a + cfg.lam * b for a, b in zip(grads, gen.backward(vtr, dU))]
        g_state, params = adam_step(g_state, gen.params, grads)
        gen = gen.with_params(params)
    return gen, log


# -- estimation rates -------------------------------------------------------------

@dataclass
class RateTable:
    n: np.ndarray
    estimates: np.ndarray  # (len(n), trials)
    slope: float

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=1)

    @property
    def median(self) -> np.ndarray:
        return np.median(self.estimates, axis=1)


def loglog_slope(n, values) -> float:
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(values, float)), 1)[0])


def rate_experiment(shape: NetShape, n_grid, trials: int = 5, seed: int = 0,
                    reference_size: int = 2**15, critic: CriticConfig | None = None) -> RateTable:
    """Surrogate CT distance between a large reference sample and ``n`` fresh
    draws of the uniform law on ``[-1, 1]^d``, averaged over trials.

    The reported slope is the least-squares slope of log mean estimate
    against log ``n``.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = shape.d
    s_ref, s_trials = _seeds(seed, 2)
    reference = EmpiricalMeasure.uniform(_philox(s_ref).uniform(-1.0, 1.0, size=(reference_size, d)))
    base = critic or CriticConfig(shape=shape, profile=ConstraintProfile.hard(1.0))
    if base.shape != shape:
        base = replace(base, shape=shape)
    est = np.zeros((len(n_grid), trials))
    trial_seeds = _seeds(s_trials, trials)
    for t, ts in enumerate(trial_seeds):
        rng = _philox(ts)
        for i, n in enumerate(n_grid):
            sample = EmpiricalMeasure.uniform(rng.uniform(-1.0, 1.0, size=(n, d)))
            est[i, t] = estimate_ct(reference, sample, replace(base, seed=(ts + i) % 2**31)).value
    return RateTable(np.array(n_grid), est, loglog_slope(n_grid, est.mean(axis=1)))
