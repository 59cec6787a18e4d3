"""Finite-difference checks for every analytic gradient surface."""

import numpy as np
import pytest

from mspursuit import (
    ClassPartition,
    GameSpec,
    GenerationConfig,
    decoder_gradient,
    decoder_utility,
    encoder_gradient,
    encoder_utility,
    generate,
    grad_rate_reduction_classwise,
    grad_rate_reduction_pair,
    rate_reduction_classwise,
    rate_reduction_pair,
)
from mspursuit.training import _DecoderProblem

from conftest import central_diff, rel_err


def toy_dataset(seed=0, k=2):
    cfg = GenerationConfig(
        n_per_class=tuple([5] * k),
        d_x=6,
        subspace_dims=tuple([2] * k),
        nu=0.4,
        sigma_sq=0.01,
        seed=seed,
    )
    return generate(cfg)


def test_grad_pair_matches_fd(rng):
    for _ in range(8):
        Z1 = rng.standard_normal((3, 5))
        Z2 = rng.standard_normal((3, 5))
        D1, D2 = grad_rate_reduction_pair(Z1, Z2, 0.8)
        F1 = central_diff(lambda W: rate_reduction_pair(W, Z2, 0.8), Z1)
        F2 = central_diff(lambda W: rate_reduction_pair(Z1, W, 0.8), Z2)
        assert rel_err(D1, F1) < 1e-5
        assert rel_err(D2, F2) < 1e-5


def test_grad_pair_zero_at_equal_grams(rng):
    Z = rng.standard_normal((4, 6))
    D1, D2 = grad_rate_reduction_pair(Z, Z.copy(), 1.0)
    assert np.linalg.norm(D1) < 1e-12
    assert np.linalg.norm(D2) < 1e-12


def test_grad_classwise_matches_fd(rng):
    part = ClassPartition.from_counts([3, 4])
    for _ in range(8):
        Z = rng.standard_normal((4, 7))
        D = grad_rate_reduction_classwise(Z, part, 0.9)
        Ffd = central_diff(lambda W: rate_reduction_classwise(W, part, 0.9), Z)
        assert rel_err(D, Ffd) < 1e-5


@pytest.mark.parametrize("kind,d_z", [("msp", 4), ("ssp", 4)])
def test_encoder_gradient_matches_fd(rng, kind, d_z):
    ds = toy_dataset(seed=3, k=2 if kind == "msp" else 1)
    spec = GameSpec(kind, ds.d_x, d_z, 0.8)
    for _ in range(5):
        F = rng.standard_normal((d_z, ds.d_x))
        G = rng.standard_normal((ds.d_x, d_z))
        g = encoder_gradient(spec, F, G, ds)
        gf = central_diff(lambda W: encoder_utility(spec, W, G, ds), F)
        assert rel_err(g, gf) < 1e-5


def test_encoder_gradient_at_zero_encoder(rng):
    ds = toy_dataset(seed=4)
    spec = GameSpec("msp", ds.d_x, 3, 1.0)
    F = np.zeros((3, ds.d_x))
    G = rng.standard_normal((ds.d_x, 3))
    g = encoder_gradient(spec, F, G, ds)
    gf = central_diff(lambda W: encoder_utility(spec, W, G, ds), F)
    assert np.max(np.abs(g - gf)) < 1e-6


@pytest.mark.parametrize("kind", ["msp", "ssp"])
def test_decoder_gradient_matches_fd(rng, kind):
    ds = toy_dataset(seed=5, k=2 if kind == "msp" else 1)
    spec = GameSpec(kind, ds.d_x, 4, 1.1)
    for _ in range(5):
        F = rng.standard_normal((4, ds.d_x))
        G = rng.standard_normal((ds.d_x, 4))
        g = decoder_gradient(spec, F, G, ds)
        gf = central_diff(lambda W: decoder_utility(spec, F, W, ds), G)
        assert rel_err(g, gf) < 1e-5


def test_decoder_gradient_at_pseudoinverse_is_fd_consistent(rng):
    from mspursuit import pseudoinverse_decoder

    ds = toy_dataset(seed=6)
    spec = GameSpec("msp", ds.d_x, 4, 1.0)
    F = rng.standard_normal((4, ds.d_x))
    G = pseudoinverse_decoder(F)
    g = decoder_gradient(spec, F, G, ds)
    gf = central_diff(lambda W: decoder_utility(spec, F, W, ds), G)
    # the maximizer set is degenerate; the assertion is the finite-difference match
    assert np.max(np.abs(g - gf)) < 1e-5


def test_fast_decoder_problem_agrees_with_general_path(rng):
    ds = toy_dataset(seed=7)
    spec = GameSpec("msp", ds.d_x, 4, 0.9)
    F = rng.standard_normal((4, ds.d_x))
    G = rng.standard_normal((ds.d_x, 4))
    prob = _DecoderProblem(spec, F, ds)
    assert np.max(np.abs(prob.grad(G) - decoder_gradient(spec, F, G, ds))) < 1e-11
    assert prob.utility(G) == pytest.approx(decoder_utility(spec, F, G, ds), abs=1e-11)
