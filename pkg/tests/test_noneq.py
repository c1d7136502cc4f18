import numpy as np
import pytest

from subradiant import (
    Distribution,
    DivergentEntropy,
    Level,
    ModelParams,
    build_generator,
    currents,
    detailed_balance_check,
    entropy_rates,
    index_of,
    steady_state,
)
from subradiant.model import levels
from subradiant.noneq import CurrentField, max_circulation, neighbor_pairs, plaquette_circulation, restrict_to_boundary


def entropy_oracle(Q, p):
    """Half-sums over ordered pairs with dense loops; x ln x -> 0 convention."""
    n = len(p)
    s_tot = s_e = s_i = 0.0
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            x, y = p[a] * Q[b, a], p[b] * Q[a, b]
            if x == 0 and y == 0:
                continue
            s_tot += 0.5 * (x - y) * np.log(p[a] / p[b])
            s_e += 0.5 * (x - y) * np.log(Q[a, b] / Q[b, a])
            s_i += 0.5 * (x - y) * np.log(x / y)
    return s_tot, s_e, s_i


@pytest.mark.parametrize("N,w,gamma", [(4, 0.2, 0.1), (8, 0.05, 0.1), (10, 1.0, 0.5)])
def test_entropy_matches_oracle_random(N, w, gamma):
    rng = np.random.default_rng(N)
    gen = build_generator(ModelParams(N, w, gamma))
    p = rng.random(gen.dimension)
    p /= p.sum()
    rep = entropy_rates(gen, Distribution(gen.params, p))
    ref = entropy_oracle(gen.Q.toarray(), p)
    np.testing.assert_allclose([rep.s_tot, rep.s_e, rep.s_i], ref, rtol=1e-10, atol=1e-14)
    assert rep.s_tot == pytest.approx(rep.s_e + rep.s_i, rel=1e-10)


def test_s_i_nonnegative_random():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        N = 2 * int(rng.integers(1, 9))
        gen = build_generator(ModelParams(N, float(rng.uniform(1e-3, 2)), float(rng.uniform(1e-3, 2))))
        p = rng.dirichlet(np.ones(gen.dimension))
        rep = entropy_rates(gen, Distribution(gen.params, p))
        assert rep.s_i >= 0
        assert abs(rep.s_tot - rep.s_e - rep.s_i) <= 1e-10 * max(1.0, abs(rep.s_i), abs(rep.s_e))


@pytest.mark.parametrize("N,w", [(20, 0.05), (20, 0.2), (100, 0.05), (100, 0.2), (200, 0.1)])
def test_steady_entropy_identities(solved, N, w):
    gen, dist = solved(N, w)
    rep = entropy_rates(gen, dist)
    assert rep.s_i >= 0
    assert abs(rep.s_tot) < 1e-8 * max(1.0, rep.s_i)
    assert abs(rep.s_e + rep.s_i) < 1e-8 * max(1.0, rep.s_i)


def test_one_way_edges_diverge():
    gen = build_generator(ModelParams(10, 0.0, 0.1))
    with pytest.raises(DivergentEntropy):
        entropy_rates(gen, Distribution.uniform(gen.params))


def test_flux_floor_skips_empty_pairs():
    p = ModelParams(20, 0.2, 0.1)
    gen = build_generator(p)
    rep = entropy_rates(gen, Distribution.point_mass(p, (3, 1)))
    assert rep.n_edges_skipped > 0
    assert np.isfinite(rep.s_i)


def test_point_mass_currents():
    p = ModelParams(10, 0.2, 0.1)
    gen = build_generator(p)
    src = index_of(p, (2, 0))
    field = currents(gen, Distribution.point_mass(p, (2, 0)))
    col = gen.Q[:, src].toarray().ravel()
    for a, b, W in zip(field.source, field.target, field.W):
        if src == a:
            assert W == pytest.approx(col[b], rel=1e-15)
        elif src == b:
            assert W == pytest.approx(-col[a], rel=1e-15)
        else:
            assert W == 0.0
    assert field.current(src, src + 1) == -field.current(src + 1, src)


@pytest.mark.parametrize("N,w", [(20, 0.2), (100, 0.2), (100, 0.05)])
def test_node_balance(solved, N, w):
    gen, dist = solved(N, w)
    field = currents(gen, dist)
    assert np.abs(field.divergence()).max() < 1e-10 * np.abs(field.W).max()
    X = field.as_matrix()
    assert abs(X + X.T).max() == 0


def test_phase_contrast_in_currents(solved):
    w_lo = np.abs(currents(*solved(100, 0.05)).W).max()
    w_hi = np.abs(currents(*solved(100, 0.2)).W).max()
    assert w_hi > 10 * w_lo


def test_current_loop_orientation(solved):
    # climb by J-raising repump, cascade down in M, return by J-lowering repump
    gen, dist = solved(100, 0.2)
    f = currents(gen, dist)
    J, M = levels(gen.params)
    dJ = J[f.target] - J[f.source]
    dM = M[f.target] - M[f.source]
    up = f.W[(dJ == 1) & (dM == 1)].sum()
    down = f.W[(dJ == 0) & (dM == 1)].sum()
    back = f.W[(dJ == 1) & (dM == -1)].sum()
    assert up > 0 and down < 0 and back < 0
    assert up == pytest.approx(-back, rel=1e-8)


def test_circulation_vanishes_for_gradient_field():
    # a reversible chain has no circulation around any loop
    gen = build_generator(ModelParams(20, 0.2, 0.1))
    rng = np.random.default_rng(0)
    phi = rng.random(gen.dimension)
    a, b, _, _ = neighbor_pairs(gen)
    field = CurrentField(gen.params, a, b, phi[a] - phi[b])
    assert max_circulation(field) < 1e-12
    shapes = plaquette_circulation(field)
    assert set(shapes) == {"up_right", "down_right", "wedge_right", "wedge_left"}


def test_detailed_balance_broken_phase(solved):
    res = detailed_balance_check(*solved(100, 0.2), tol=1e-3)
    assert not res.passed and res.worst_edge is not None
    assert isinstance(res.worst_edge[0], Level)


def test_detailed_balance_phase_contrast(solved):
    lo = detailed_balance_check(*solved(100, 0.05))
    hi = detailed_balance_check(*solved(100, 0.2))
    assert hi.weighted_violation > 10 * lo.weighted_violation


@pytest.mark.parametrize("N", [20, 100])
def test_boundary_chain_reversible(N):
    gen = restrict_to_boundary(build_generator(ModelParams(N, 0.05, 0.1)))
    dist = steady_state(gen)
    J, M = levels(gen.params)
    assert dist.weights[M == -J].sum() > 1 - 1e-12
    assert detailed_balance_check(gen, dist, tol=1e-9).passed




def test_entropy_saturates_and_decays_large_n(solved):
    hi = [entropy_rates(*solved(N, 0.2)).s_i_per_atom for N in (500, 1000)]
    lo = [entropy_rates(*solved(N, 0.05)).s_i_per_atom for N in (500, 1000)]
    assert min(hi) > 0 and abs(hi[1] / hi[0] - 1) < 0.2
    assert lo[1] < lo[0]


def test_entropy_scaling_signature(solved):
    hi = [entropy_rates(*solved(N, 0.2)).s_i_per_atom for N in (200, 400, 800)]
    lo = [entropy_rates(*solved(N, 0.05)).s_i_per_atom for N in (200, 400, 800)]
    assert all(abs(b / a - 1) < 0.25 for a, b in zip(hi, hi[1:]))
    assert lo[0] > lo[1] > lo[2]
