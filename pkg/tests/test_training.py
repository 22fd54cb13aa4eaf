from __future__ import annotations

import copy

import numpy as np
import pytest

from genco.autodiff import Tensor
from genco.exceptions import DataValidationError
from genco.layers import LevelProblem, PathProblem, SolverLayer, SolverLayerConfig, project_tangent
from genco.levels import EMPTY, WALL, N_CLASSES, check_feasible, one_hot
from genco.nn import DenseNet, OptimState, RngStream
from genco.paths import COST_TABLE
from genco.training import (GanState, GanTrainConfig, PenalizedTrainConfig, VqvaeState, VqvaeTrainConfig,
                            constrained_gan_epoch, genco_step, generate_samples, level_auditor,
                            path_objective, penalized_gan_epoch, postprocess_baseline_epoch, quantize,
                            semantic_penalty, softmax_rows, tile_costs, tile_softmax, vqvae_step)


def small_gan(cfg, out_dim, seed=0):
    return GanState.create(cfg.noise_dim, out_dim, cfg, seed)


def test_gamma_zero_equals_group_only_bitwise(spec5, levels50):
    cfg = GanTrainConfig(hidden=(16,), batch_size=4)
    layer = SolverLayer(LevelProblem(spec5), cfg.solver)
    a, b = small_gan(cfg, 200), small_gan(cfg, 200)
    noise = RngStream(5).normal((4, cfg.noise_dim))

    def group(x, c):
        return -a.adversary(x).mean()

    def individual(x, c):
        return tile_costs(x, 25).sum(axis=1)

    genco_step(a.generator, a.gen_opt, layer, noise, group, latent=tile_softmax)
    genco_step(b.generator, b.gen_opt, layer, noise, lambda x, c: -b.adversary(x).mean(), individual,
               gamma=0.0, latent=tile_softmax)
    assert a.generator.flat().tobytes() == b.generator.flat().tobytes()


def test_objective_only_step_matches_hand_gradient():
    # L = 0, D = cost^T x through the path layer; compare against a numpy chain rule
    h = w = 3
    gamma = 0.7
    gen = DenseNet.build([4, 8, h * w * N_CLASSES], RngStream(3))
    ref = gen.copy()
    noise = RngStream(4).normal((2, 4))
    layer = SolverLayer(PathProblem(h, w), SolverLayerConfig("identity", 1.0, True))
    opt = OptimState("sgd", 0.1)
    genco_step(gen, opt, _Pass(), noise, None,
               lambda x, c: path_objective(tile_costs(c, h * w), layer), gamma=gamma, latent=tile_softmax)

    ref.zero_grad()
    c = tile_softmax(ref(Tensor(noise)))
    costs = c.data.reshape(2, h * w, N_CLASSES) @ COST_TABLE
    g_costs = []
    for row in costs:
        x = PathProblem(h, w).solve(row).ravel()
        # d(cost.x)/dcost = x + (-1) * projected(cost)   (identity surrogate of a minimiser)
        g_costs.append(gamma / 2 * (x - project_tangent(row.reshape(h, w)).ravel()))
    g_c = (np.array(g_costs)[..., None] * COST_TABLE).reshape(2, -1)
    (c * Tensor(g_c)).sum().backward()
    expected = [p.data - 0.1 * p.grad for p in ref.parameters()]
    for p, e in zip(gen.parameters(), expected):
        assert np.allclose(p.data, e, atol=1e-12)


class _Pass:
    def __call__(self, c):
        return c


def test_constrained_epochs_stay_feasible(spec5, levels50):
    cfg = GanTrainConfig(hidden=(16,), batch_size=8, n_critic=1)
    st = small_gan(cfg, 200)
    data = levels50[:16]
    seen = 0
    for _ in range(25):
        for row in constrained_gan_epoch(st, data, spec5, cfg):
            assert all(check_feasible(x.reshape(spec5.shape), spec5) for x in row["x"])
            seen += 1
    assert seen == 50
    assert max(np.abs(p.data).max() for p in st.adversary.parameters()) <= cfg.w_clip


def test_fixed_adversary_untouched(spec5, levels50):
    cfg = GanTrainConfig(hidden=(16,), batch_size=8, adversary_mode="fixed")
    st = small_gan(cfg, 200)
    before = st.adversary.flat().tobytes()
    gen_before = st.generator.flat().tobytes()
    constrained_gan_epoch(st, levels50[:8], spec5, cfg)
    assert st.adversary.flat().tobytes() == before
    assert st.generator.flat().tobytes() != gen_before


def test_infeasible_datum_rejected(spec5, levels50):
    bad = levels50[:4].copy()
    bad[0] = one_hot(np.full((5, 5), EMPTY))
    cfg = GanTrainConfig(hidden=(8,), batch_size=4)
    with pytest.raises(DataValidationError):
        constrained_gan_epoch(small_gan(cfg, 200), bad, spec5, cfg)
    with pytest.raises(DataValidationError):
        postprocess_baseline_epoch(small_gan(cfg, 200), bad, spec5, cfg)


def test_baseline_adversary_sees_continuous_scores(spec5, levels50):
    cfg = GanTrainConfig(hidden=(8,), batch_size=4, n_critic=1)
    rows = postprocess_baseline_epoch(small_gan(cfg, 200), levels50[:4], spec5, cfg)
    c = rows[0]["c"]
    assert not np.all((c == 0) | (c == 1))


def test_distinct_scores_can_project_to_one_level(spec5, levels50):
    c1 = levels50[0].copy()
    c2 = c1 + 0.3 * (1 - c1) * np.random.default_rng(0).random(c1.shape)  # only off-argmax entries move
    assert not np.array_equal(c1, c2)
    p = LevelProblem(spec5)
    assert np.array_equal(p.solve(c1), p.solve(c2))


def test_penalized_epoch_and_clip(terrain200):
    cfg = PenalizedTrainConfig(hidden=(16,), batch_size=8, gamma=0.1, n_critic=2)
    st = small_gan(cfg, 6 * 6 * 8)
    rows = penalized_gan_epoch(st, terrain200[:16], (6, 6), cfg)
    assert len(rows) == 2
    assert np.allclose(rows[0]["c"].reshape(-1, N_CLASSES).sum(axis=1), 1.0)
    assert max(np.abs(p.data).max() for p in st.adversary.parameters()) <= cfg.w_clip
    with pytest.raises(DataValidationError):
        penalized_gan_epoch(st, np.zeros((4, 10)), (6, 6), cfg)


def test_semantic_penalty():
    assert semantic_penalty(one_hot(np.full((3, 3), EMPTY))) == 0.0
    assert semantic_penalty(one_hot(np.full((3, 3), WALL))) == 9.0
    a, b = one_hot(np.full((2, 2), WALL)), one_hot(np.full((2, 2), 4))
    mix = semantic_penalty(0.25 * a + 0.75 * b)
    assert mix == pytest.approx(0.25 * semantic_penalty(a) + 0.75 * semantic_penalty(b), abs=1e-12)
    t = semantic_penalty(Tensor(a.reshape(1, -1)))
    assert float(t.data) == 9.0


def test_quantize_matches_linear_scan(rng):
    book = rng.normal(size=(12, 4))
    z = rng.normal(size=(100, 4))
    for zi, k in zip(z, quantize(z, book)):
        dists = [float(((zi - e) ** 2).sum()) for e in book]
        assert k == dists.index(min(dists))
    # equidistant entries: the lower index wins
    tied = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert quantize(np.zeros((1, 2)), tied)[0] == 0
    assert quantize(np.zeros((1, 2)), tied[::-1])[0] == 0


def test_vqvae_without_recon_or_objective_leaves_decoder(spec5, levels50):
    cfg = VqvaeTrainConfig(hidden=(16,), use_recon=False, use_objective=False)
    st = VqvaeState.create(200, cfg, 0)
    dec, enc, book = st.decoder.flat().tobytes(), st.encoder.flat().tobytes(), st.codebook.data.copy()
    res = vqvae_step(st, levels50[0], spec5, cfg)
    assert check_feasible(res.x_tilde, spec5)
    assert st.decoder.flat().tobytes() == dec
    assert st.encoder.flat().tobytes() != enc
    assert not np.array_equal(st.codebook.data, book)


def test_vqvae_steps_feasible_with_objective(spec5, levels50):
    cfg = VqvaeTrainConfig(hidden=(16,), use_objective=True)
    st = VqvaeState.create(200, cfg, 1)
    for lvl in levels50[:5]:
        res = vqvae_step(st, lvl, spec5, cfg)
        assert check_feasible(res.x_tilde, spec5) and np.isfinite(res.objective)
    with pytest.raises(DataValidationError):
        vqvae_step(st, np.zeros(spec5.shape), spec5, cfg)


def test_straight_through_encoder_gradient_equals_decoder_input_gradient(rng):
    from genco.autodiff import straight_through

    enc = DenseNet.build([6, 4], RngStream(0))
    dec = DenseNet.build([4, 5], RngStream(1))
    z_e = enc(Tensor(rng.normal(size=(1, 6))))
    z_q = straight_through(z_e, rng.normal(size=(1, 4)))
    probe = Tensor(z_q.data.copy(), requires_grad=True)
    w = Tensor(rng.normal(size=(1, 5)))
    (dec(z_q) * w).sum().backward()
    enc_side = z_e.grad.copy()
    (dec(probe) * w).sum().backward()
    assert np.array_equal(enc_side, probe.grad)


def test_generate_samples_deterministic_and_feasible(spec5):
    gen = DenseNet.build([8, 16, 200], RngStream(0))
    p = LevelProblem(spec5)
    a = generate_samples(gen, 1, RngStream(9), p, latent=softmax_rows)
    b = generate_samples(gen, 1, RngStream(9), p, latent=softmax_rows)
    assert np.array_equal(a, b)
    many = generate_samples(gen, 30, RngStream(1), p)
    level_auditor(spec5)(many)
    with pytest.raises(ValueError):
        generate_samples(gen, 0, RngStream(1), p)


def test_config_validation():
    with pytest.raises(ValueError):
        GanTrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        GanTrainConfig(lr_gen=0)
    with pytest.raises(ValueError):
        GanTrainConfig(adversary_mode="frozen")
    with pytest.raises(ValueError):
        PenalizedTrainConfig(gamma=-1)
    with pytest.raises(ValueError):
        VqvaeTrainConfig(codebook_size=1)
    with pytest.raises(ValueError):
        VqvaeTrainConfig(beta1=-0.1)
    assert copy.deepcopy(GanTrainConfig()) == GanTrainConfig()
