import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomq.ged import ged_exact
from anomq.graph import induced_subgraph, load_edge_list, load_pvalues
from anomq.simgen import SimConfig, flip_noise, generate, king_grid_edges, noise_indices, write_dataset


def king_count(s):
    return 2 * s * (s - 1) + 2 * (s - 1) ** 2


@pytest.mark.parametrize("s", [1, 2, 3, 7, 20])
def test_king_grid_closed_form_small(s):
    edges = king_grid_edges(s * s, np.random.default_rng(0), 1.0)
    assert len(edges) == king_count(s)
    assert len({(min(u, v), max(u, v)) for u, v in edges.tolist()}) == len(edges)


def test_king_grid_million_vertices():
    edges = king_grid_edges(10**6, np.random.default_rng(0), 1.0)
    assert len(edges) == 3_994_002
    assert abs(len(edges) - 3_996_000) / 3_996_000 < 1e-3


def test_king_grid_degrees():
    edges = king_grid_edges(25, np.random.default_rng(0), 1.0)
    deg = np.bincount(edges.ravel(), minlength=25)
    assert deg.max() == 8 and deg[0] == 3 and deg[12] == 8


def test_sparsity_thins_edges():
    full = len(king_grid_edges(2500, np.random.default_rng(1), 1.0))
    kept = len(king_grid_edges(2500, np.random.default_rng(1), 0.4))
    assert abs(kept / full - 0.4) < 0.03


@pytest.mark.parametrize("topology", ["king-grid", "random"])
@pytest.mark.parametrize("shape", ["ring(3)", "line(4)", "star(4)", {"shape": "bipartite", "a": 2, "b": 3}])
def test_planted_shape_is_induced_copy(topology, shape):
    cfg = SimConfig(n=200, topology=topology, planted_shape=shape, seed=4)
    g, truth = generate(cfg)
    sub = induced_subgraph(g, truth.planted_vertices)
    assert ged_exact(sub, cfg.query).distance == 0
    assert sub.edges == frozenset(truth.planted_edges)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["ring(3)", "star(3)", "line(5)"]))
def test_separation_before_noise(seed, shape):
    g, truth = generate(SimConfig(n=60, planted_shape=shape, seed=seed))
    planted = np.zeros(g.n, bool)
    planted[list(truth.planted_vertices)] = True
    assert g.pvalues[planted].max() < g.pvalues[~planted].min()
    assert g.pvalues[planted].max() <= 0.15 and g.pvalues[~planted].min() >= 0.2
    assert np.all((g.pvalues > 0) & (g.pvalues <= 1))


def test_deterministic_given_seed():
    a, ta = generate(SimConfig(n=300, seed=9, noise_percent=10))
    b, tb = generate(SimConfig(n=300, seed=9, noise_percent=10))
    assert np.array_equal(a.edges(), b.edges()) and np.array_equal(a.pvalues, b.pvalues)
    assert ta == tb
    c, _ = generate(SimConfig(n=300, seed=10, noise_percent=10))
    assert not np.array_equal(a.pvalues, c.pvalues)


def test_bad_configs():
    with pytest.raises(ValueError):
        SimConfig(topology="torus")
    with pytest.raises(ValueError):
        SimConfig(sparsity=0)
    with pytest.raises(ValueError):
        SimConfig(planted_pvalue_max=0.3, background_pvalue_min=0.2)
    with pytest.raises(ValueError):
        generate(SimConfig(n=3, planted_shape="star(4)"))


def test_write_dataset_round_trip(tmp_path):
    g, truth = generate(SimConfig(n=50, seed=2))
    paths = write_dataset(g, truth, tmp_path / "ds")
    h = load_pvalues(paths["pvalues"], load_edge_list(paths["graph"]))
    assert np.array_equal(g.edges(), h.edges())
    assert np.array_equal(g.pvalues, h.pvalues)
    assert json.loads(paths["truth"].read_text())["planted_vertices"] == list(truth.planted_vertices)


# -- noise -------------------------------------------------------------------

def test_flip_single_value():
    out = flip_noise([0.1], 100, seed=0)
    assert out[0] == pytest.approx(0.9)


def test_flip_zero_is_identity():
    p = np.random.default_rng(0).uniform(0.01, 1, 100)
    assert np.array_equal(flip_noise(p, 0, seed=3), p)


def test_flip_count_and_clamp():
    p = np.full(40, 1.0)
    out = flip_noise(p, 10, seed=1)
    changed = np.flatnonzero(out != p)
    assert len(changed) == 4
    assert np.all(out[changed] > 0)


def test_flip_rejects_bad_percent():
    with pytest.raises(ValueError):
        flip_noise([0.5], 101)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300), st.floats(0, 100), st.integers(0, 2**32 - 1))
def test_flip_count_and_involution(n, K, seed):
    p = np.random.default_rng(seed).uniform(1e-6, 1, n)
    out = flip_noise(p, K, seed)
    assert np.count_nonzero(out != p) <= round(K * n / 100)
    assert len(noise_indices(n, K, seed)) == round(K * n / 100)
    assert np.allclose(flip_noise(out, K, seed), p, rtol=0, atol=1e-12)
