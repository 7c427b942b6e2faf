import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from seqrefine.corpus import InteractionLog, build_graphs
from seqrefine.refine import (
    EPS,
    RefineConfig,
    SimilarityMatrix,
    augment_active,
    augment_inactive,
    detect_noise,
    find_noise,
    item_similarity,
    refine_all,
)
from seqrefine.synthetic import SyntheticSpec, generate_synthetic, plant_outliers
from oracles import dense_similarity


def sym(J, edges):
    Z = np.zeros((J, J))
    for (a, b), w in edges.items():
        Z[a, b] = Z[b, a] = w
    return Z


def graphs_with(rows, num_items=10, T=2):
    """IntervalGraphs whose interval t holds ``rows[t]``: user -> item list (in order)."""
    events, ts = [], 0
    for t, row in enumerate(rows):
        for u, items in row.items():
            for i in items:
                events.append((u, i, t * 1000 + ts % 1000))
                ts += 1
    # a dedicated user pins the interval grid
    events.append((9, 9, 0))
    events.append((9, 9, T * 1000))
    g = build_graphs(InteractionLog.from_events(events), T)
    g.num_items = max(g.num_items, num_items)
    return g


# -- similarity ---------------------------------------------------------------------

def test_two_hop_pair_has_unit_similarity():
    sim = item_similarity(sp.csr_matrix(sym(3, {(0, 1): 1.0, (1, 2): 1.0})))
    assert sim.get(0, 2) == 1.0 / (1.0 + EPS)
    assert sim.get(2, 0) == sim.get(0, 2)


def test_isolated_item_has_no_similarities():
    sim = item_similarity(sp.csr_matrix(sym(4, {(0, 1): 1.0})))
    assert sim.neighbors(3) == {}


def test_single_item_catalogue_is_empty():
    assert item_similarity(sp.csr_matrix((1, 1))).nnz == 0


def test_top_k_keeps_largest_per_row():
    Z = sym(6, {(0, 1): 1.0, (0, 2): 0.5, (1, 2): 1.0, (2, 3): 0.2, (3, 4): 1.0, (4, 5): 0.7, (0, 5): 0.3})
    exact = item_similarity(sp.csr_matrix(Z)).matrix.toarray()
    top = item_similarity(sp.csr_matrix(Z), top_k=2).matrix.toarray()
    for i in range(6):
        kept = np.flatnonzero(top[i])
        assert len(kept) == min(2, np.count_nonzero(exact[i]))
        np.testing.assert_array_equal(top[i, kept], exact[i, kept])
        if len(kept):
            assert top[i, kept].min() >= np.sort(exact[i])[::-1][len(kept) - 1]


small_z = st.integers(2, 9).flatmap(lambda J: st.tuples(
    st.just(J),
    st.dictionaries(st.tuples(st.integers(0, J - 1), st.integers(0, J - 1)).filter(lambda p: p[0] < p[1]),
                    st.sampled_from([0.25, 0.5, 0.75, 1.0]), max_size=15),
))


@settings(max_examples=100, deadline=None)
@given(small_z)
def test_similarity_matches_dense_oracle(case):
    J, edges = case
    Z = sym(J, edges)
    got = item_similarity(sp.csr_matrix(Z)).matrix.toarray()
    np.testing.assert_allclose(got, dense_similarity(Z), rtol=1e-12, atol=0)
    assert np.all(np.isfinite(got)) and np.all(got >= 0)


@settings(max_examples=60, deadline=None)
@given(small_z, st.randoms(use_true_random=False))
def test_similarity_is_permutation_equivariant(case, rnd):
    J, edges = case
    perm = list(range(J))
    rnd.shuffle(perm)
    P = np.eye(J)[perm]
    Z = sym(J, edges)
    a = item_similarity(sp.csr_matrix(Z)).matrix.toarray()
    b = item_similarity(sp.csr_matrix(P @ Z @ P.T)).matrix.toarray()
    np.testing.assert_allclose(b, P @ a @ P.T, rtol=1e-12, atol=0)


# -- noise detection ------------------------------------------------------------------

def clique_sim(J, groups, w=0.9):
    entries = {}
    for g in groups:
        for a in g:
            for b in g:
                if a != b:
                    entries[(a, b)] = w
    return SimilarityMatrix.from_dict(J, entries)


def test_unconnected_item_is_noise_and_scaled():
    a, b, c, x = 0, 1, 2, 7
    g = graphs_with([{0: [a, b, c, x]}, {}])
    sim = clique_sim(10, [[a, b, c]])
    noise = detect_noise(0, 0, sim, g, RefineConfig(beta=0.3))
    assert noise == {x}
    assert g.user_item[0].get(0, x) == pytest.approx(0.3)
    assert g.user_item[0].get(0, a) == 1.0


def test_too_few_items_skip_detection():
    assert find_noise([4], clique_sim(10, []), min_items=3) == set()
    assert find_noise([4, 5], clique_sim(10, []), min_items=3) == set()


def test_mutually_similar_items_are_clean():
    assert find_noise([0, 1, 2, 3], clique_sim(10, [[0, 1, 2, 3]])) == set()


def test_beta_zero_deletes_and_positive_beta_keeps():
    g = graphs_with([{0: [0, 1, 2, 7]}, {}])
    sim = clique_sim(10, [[0, 1, 2]])
    detect_noise(0, 0, sim, g, RefineConfig(beta=0.0))
    assert 7 not in g.user_item[0].items_of(0)
    g = graphs_with([{0: [0, 1, 2, 7]}, {}])
    detect_noise(0, 0, sim, g, RefineConfig(beta=1e-3))
    assert g.user_item[0].get(0, 7) == pytest.approx(1e-3)


def test_planted_outliers_are_flagged():
    planted = plant_outliers(SyntheticSpec(n_users=30, n_items=30, n_communities=3, events_per_interval=6))
    assert planted.outliers
    sim = item_similarity(planted.graphs.item_item[planted.t], top_k=None)
    for u, x in planted.outliers.items():
        items = sorted(planted.graphs.user_item[planted.t].items_of(u))
        assert find_noise(items, sim, 3) == {x}


# -- augmentation -----------------------------------------------------------------------

def test_inactive_user_borrows_from_previous_interval():
    a, b = 0, 1
    g = graphs_with([{0: [a]}, {1: [5]}])
    sim = SimilarityMatrix.from_dict(10, {(a, b): 0.9, (b, a): 0.9})
    added = augment_inactive(0, 1, sim, g, RefineConfig(min_sim=0.7))
    assert added == [(b, 0.9)]
    assert g.user_item[1].get(0, b) == 0.9


def test_inactive_below_threshold_adds_nothing():
    g = graphs_with([{0: [0]}, {1: [5]}])
    sim = SimilarityMatrix.from_dict(10, {(0, 1): 0.4, (1, 0): 0.4})
    assert augment_inactive(0, 1, sim, g, RefineConfig(min_sim=0.5)) == []


def test_inactive_twice_or_first_interval_is_noop():
    g = graphs_with([{1: [3]}, {1: [5]}])
    sim = SimilarityMatrix.from_dict(10, {(0, 1): 0.9, (1, 0): 0.9})
    assert augment_inactive(0, 1, sim, g, RefineConfig()) == []
    assert augment_inactive(0, 0, sim, g, RefineConfig()) == []


def test_active_user_gains_similar_items():
    a, c = 0, 2
    g = graphs_with([{0: [a]}, {}])
    sim = SimilarityMatrix.from_dict(10, {(a, c): 0.8, (c, a): 0.8})
    assert augment_active(0, 0, sim, g, RefineConfig(min_sim=0.7)) == [(c, 0.8)]


def test_active_never_overwrites_existing_entries():
    g = graphs_with([{0: [0, 2]}, {}])
    sim = SimilarityMatrix.from_dict(10, {(0, 2): 0.8, (2, 0): 0.8})
    assert augment_active(0, 0, sim, g, RefineConfig(min_sim=0.7)) == []
    assert g.user_item[0].get(0, 2) == 1.0


def test_cap_keeps_highest_similarity():
    g = graphs_with([{0: [0]}, {}])
    sim = SimilarityMatrix.from_dict(10, {(0, 3): 0.8, (0, 4): 0.9})
    assert augment_active(0, 0, sim, g, RefineConfig(min_sim=0.5, max_aug_per_user=1)) == [(4, 0.9)]


def test_augmentation_weight_is_capped_at_one():
    g = graphs_with([{0: [0]}, {}])
    sim = SimilarityMatrix.from_dict(10, {(0, 3): 2.5})
    assert augment_active(0, 0, sim, g, RefineConfig(min_sim=0.5)) == [(3, 1.0)]


# -- composite ---------------------------------------------------------------------------

def synthetic_graphs(seed=0, noise=0.3):
    spec = SyntheticSpec(n_users=25, n_items=30, noise_rate=noise, events_per_interval=5, seed=seed)
    return build_graphs(generate_synthetic(spec).log, spec.n_intervals)


def test_beta_one_high_threshold_is_identity():
    g = synthetic_graphs()
    max_sim = max(item_similarity(z).max() for z in g.item_item)
    out, report = refine_all(g, RefineConfig(beta=1.0, min_sim=max_sim * 2))
    for t in range(g.T):
        assert list(out.user_item[t].entries()) == list(g.user_item[t].entries())
    assert report.augmented_count == 0


def test_input_graphs_are_not_mutated():
    g = synthetic_graphs()
    before = [list(a.entries()) for a in g.user_item]
    refine_all(g, RefineConfig())
    assert [list(a.entries()) for a in g.user_item] == before


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_refined_weights_stay_in_allowed_set(seed):
    cfg = RefineConfig(beta=0.5, min_sim=0.7)
    out, report = refine_all(synthetic_graphs(seed), cfg)
    for a in out.user_item:
        for _, _, w in a.entries():
            assert w in (cfg.beta, 1.0) or cfg.min_sim <= w <= 1.0
    for init, noisy, aug in zip(report.initial, report.noisy, report.augmented):
        assert 0 <= noisy <= init and aug >= 0


def test_report_json_has_count_columns():
    _, report = refine_all(synthetic_graphs(), RefineConfig())
    d = json.loads(report.to_json())
    for key in ("initial_interactions", "noisy_interactions", "augmented_interactions", "execution_time_s"):
        assert key in d
    assert d["initial_interactions"] == sum(r["initial"] for r in d["per_interval"])


def test_refinement_is_deterministic():
    g = synthetic_graphs(3)
    a, _ = refine_all(g, RefineConfig())
    b, _ = refine_all(g, RefineConfig())
    assert [list(x.entries()) for x in a.user_item] == [list(x.entries()) for x in b.user_item]


@pytest.mark.parametrize("kwargs", [{"beta": 1.5}, {"beta": -0.1}, {"min_sim": 0.0}, {"top_k": 0},
                                    {"max_aug_per_user": -1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RefineConfig(**kwargs)
