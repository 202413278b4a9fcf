"""Tests for concrete coarse median spaces, closeness, invariance and transport along quasi-isometries."""
import itertools
import math

import networkx as nx
import numpy as np
import pytest

from conftest import random_tree_edges, random_tree_graph, random_unicyclic_graph
from models.coarse_models import (MODE_EXHAUSTIVE, MODE_SAMPLED, CoarseParameters, QuasiIsometryPair,
                                  affine_map, algebra_model, check_lipschitz, closeness_distance,
                                  conjugate_model, coordinate_algebra, euclidean_model,
                                  euclidean_rotation_gap, gap_sweep, graph_model, invariance_defect,
                                  l1_lattice_model, measure_parameters, permutation_map, pullback,
                                  pushforward, resolve_mode, rotation_matrix, transport_roundtrip_bound)
from models.cube_complex import majority_bits_algebra, tree_algebra
from models.errors import CapExceededError, InputError
from models.median_algebra import verify_median_axioms
from models.median_metrics import WallWeighting, wall_metric

TOL = 1e-9


def halving_pair():
    """x -> floor(x / 2) from 0..7 onto 0..3, with y -> 2y back."""
    source = l1_lattice_model(1, 8)
    target = l1_lattice_model(1, 4)
    return QuasiIsometryPair(source, target, lambda p: (p[0] // 2,), lambda q: (2 * q[0],))


class TestModes:
    def test_auto(self):
        assert resolve_mode(None, 10, 64, None) == MODE_EXHAUSTIVE
        assert resolve_mode(None, 100, 64, 5) == MODE_SAMPLED

    def test_forced_exhaustive_beyond_cap(self):
        with pytest.raises(CapExceededError):
            resolve_mode(MODE_EXHAUSTIVE, 100, 64, None)

    def test_sampled_needs_seed(self):
        with pytest.raises(InputError):
            resolve_mode(MODE_SAMPLED, 10, 64, None)
        with pytest.raises(InputError):
            resolve_mode(None, 100, 64, None)

    def test_unknown(self):
        with pytest.raises(InputError):
            resolve_mode("lazy", 10, 64, 0)


class TestCoordinateModels:
    def test_lattice_carrier(self):
        model = l1_lattice_model(2, [3, 4])
        assert len(model) == 12
        assert model.med((0, 0), (2, 1), (1, 3)) == (1, 1)
        assert model.dist((0, 0), (2, 3)) == pytest.approx(5)
        assert model.params == CoarseParameters(1.0, 0.0, 0.0)
        assert model.rank_bound == 2

    @pytest.mark.parametrize("n,box", [(0, 3), (2, 0), (2, [3])])
    def test_lattice_rejects(self, n, box):
        with pytest.raises(InputError):
            l1_lattice_model(n, box)

    def test_lattice_lipschitz(self):
        report = check_lipschitz(l1_lattice_model(2, 3))
        assert report.ok
        assert report.exhaustive
        assert report.excess == pytest.approx(0.0, abs=TOL)

    def test_euclidean_carrier(self):
        model = euclidean_model(2, 2)
        assert len(model) == 13
        assert model.params.k == pytest.approx(math.sqrt(2))
        assert model.dist((0, 0), (2, 0)) == pytest.approx(2)
        assert check_lipschitz(model).ok

    def test_euclidean_rejects(self):
        with pytest.raises(InputError):
            euclidean_model(2, -1)

    def test_sampled_lipschitz_is_seeded(self):
        model = l1_lattice_model(2, 10)
        first = check_lipschitz(model, samples=500, seed=3)
        second = check_lipschitz(model, samples=500, seed=3)
        assert first.ok
        assert not first.exhaustive
        assert first.checked == 500
        assert first.to_dict() == second.to_dict()

    def test_lipschitz_failure_has_witness(self):
        report = check_lipschitz(l1_lattice_model(1, 4), k=0.0, h0=0.0)
        assert not report.ok
        assert report.excess > 0
        left, right = report.witness
        assert len(left) == len(right) == 3

    def test_coordinate_algebra(self):
        M = coordinate_algebra([(0, 0), (0, 1), (1, 0), (1, 1)])
        assert verify_median_axioms(M).ok
        assert M.med((0, 1), (1, 0), (1, 1)) == (1, 1)

    def test_coordinate_algebra_not_closed(self):
        M = coordinate_algebra([(1, 0), (0, 1), (2, 2)])
        with pytest.raises(InputError):
            M.table


class TestRotationGap:
    @pytest.mark.parametrize("k", [1.0, 2.0, 5.0, 12.5])
    def test_quarter_turn_diagonal(self, k):
        assert euclidean_rotation_gap(k, math.pi / 4) == pytest.approx(k / math.sqrt(2), abs=TOL)

    def test_right_angle_commutes(self):
        assert euclidean_rotation_gap(3.0, math.pi / 2) == pytest.approx(0.0, abs=TOL)

    def test_sweep_is_linear(self):
        sweep = gap_sweep(5, math.pi / 4)
        assert [k for k, _ in sweep] == [1, 2, 3, 4, 5]
        assert all(gap == pytest.approx(k / math.sqrt(2)) for k, gap in sweep)

    def test_rejects(self):
        with pytest.raises(InputError):
            euclidean_rotation_gap(0.0, 1.0)
        with pytest.raises(InputError):
            gap_sweep(0, 1.0)

    def test_conjugate_by_quarter_turn(self):
        model = euclidean_model(2, 2)
        turned = conjugate_model(model, rotation_matrix(math.pi / 2))
        assert closeness_distance(model, turned).sup_observed == pytest.approx(0.0, abs=TOL)
        assert turned.params.h0 == pytest.approx(math.sqrt(2))

    def test_conjugate_by_eighth_turn_moves_medians(self):
        model = euclidean_model(2, 3)
        turned = conjugate_model(model, rotation_matrix(math.pi / 4), round_to_lattice=False)
        assert closeness_distance(model, turned).sup_observed > 1.0

    def test_conjugate_needs_orthogonal(self):
        with pytest.raises(InputError):
            conjugate_model(euclidean_model(2, 1), [[2.0, 0.0], [0.0, 1.0]])


class TestGraphModels:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_tree_centres_are_tree_medians(self, seed):
        graph = random_tree_graph(15, seed)
        model = graph_model(graph)
        M = tree_algebra(range(15), random_tree_edges(15, seed))
        for x, y, z in itertools.combinations_with_replacement(range(15), 3):
            assert model.med(x, y, z) == M.med(x, y, z)
        assert model.center_quality() == 0
        assert model.gromov_delta() == 0

    def test_cycle_of_four(self):
        model = graph_model(nx.cycle_graph(4))
        assert model.gromov_delta() == 1
        assert model.med(0, 1, 2) == 1

    def test_cycle_of_six_delta(self):
        assert graph_model(nx.cycle_graph(6)).gromov_delta() == pytest.approx(1.0)

    def test_tie_breaks_agree_on_trees(self):
        graph = random_tree_graph(12, 4)
        estimate = closeness_distance(graph_model(graph, "lex"), graph_model(graph, "antilex"))
        assert estimate.exhaustive
        assert estimate.sample_count == 12 ** 3
        assert estimate.sup_observed == 0

    @pytest.mark.parametrize("seed", [0, 3])
    def test_unicyclic_closeness_is_finite(self, seed):
        graph = random_unicyclic_graph(12, seed)
        lex, antilex = graph_model(graph, "lex"), graph_model(graph, "antilex")
        estimate = closeness_distance(lex, antilex)
        assert estimate.exhaustive
        assert 0 <= estimate.sup_observed <= lex.D.max()

    def test_interval_centres_on_the_cube_are_majority(self):
        cube = majority_bits_algebra(3)
        hamming = wall_metric(cube, WallWeighting.uniform(cube))
        graph = graph_model(nx.hypercube_graph(3), geodesics="interval")
        assert closeness_distance(graph, algebra_model(cube, hamming)).sup_observed == 0

    def test_measured_parameters_pass_lipschitz(self):
        graph = graph_model(random_unicyclic_graph(10, 1))
        params = measure_parameters(graph)
        assert params.exhaustive
        assert params.h0 == pytest.approx(3 * params.one_coordinate)
        assert check_lipschitz(graph, k=params.k, h0=params.h0).ok

    def test_tree_parameters(self):
        assert graph_model(random_tree_graph(6, 0)).params == CoarseParameters(1.0, 0.0, 0.0)

    def test_rejects(self):
        with pytest.raises(InputError):
            graph_model(nx.path_graph(3), tie_break="random")
        with pytest.raises(InputError):
            graph_model(nx.path_graph(3), geodesics="all")
        with pytest.raises(InputError):
            graph_model(nx.Graph())
        with pytest.raises(InputError):
            graph_model(nx.Graph([(0, 1), (2, 3)]))
        with pytest.raises(InputError):
            graph_model(nx.path_graph(3)).med(0, 1, 7)


class TestCloseness:
    def test_self_closeness(self):
        model = l1_lattice_model(2, 3)
        estimate = closeness_distance(model, model)
        assert estimate.sup_observed == 0
        assert estimate.seed is None

    def test_sampled(self):
        graph = random_unicyclic_graph(12, 2)
        lex, antilex = graph_model(graph, "lex"), graph_model(graph, "antilex")
        first = closeness_distance(lex, antilex, mode=MODE_SAMPLED, samples=300, seed=9)
        second = closeness_distance(lex, antilex, mode=MODE_SAMPLED, samples=300, seed=9)
        assert first.to_dict() == second.to_dict()
        assert first.sample_count == 300
        assert first.seed == 9

    def test_extra_triples_are_added(self):
        model = l1_lattice_model(1, 3)
        estimate = closeness_distance(model, model, extra_triples=[((0,), (1,), (2,))])
        assert estimate.sample_count == 27

    def test_different_carriers(self):
        with pytest.raises(InputError):
            closeness_distance(l1_lattice_model(1, 3), l1_lattice_model(1, 4))


class TestInvariance:
    def test_coordinate_swap(self):
        model = l1_lattice_model(2, 5)
        defect = invariance_defect(model, [affine_map([[0, 1], [1, 0]])])
        assert defect.sup_observed == 0
        assert defect.exhaustive

    def test_lattice_symmetries_of_the_ball(self):
        model = euclidean_model(2, 2)
        maps = [affine_map([[0, -1], [1, 0]]), affine_map([[-1, 0], [0, 1]])]
        assert invariance_defect(model, maps).sup_observed == pytest.approx(0.0, abs=TOL)

    def test_eighth_turn(self):
        model = euclidean_model(2, 2)
        triple = ((2, 0), (0, 2), (0, 0))
        defect = invariance_defect(model, [affine_map(rotation_matrix(math.pi / 4))], extra_triples=[triple])
        assert defect.sup_observed >= math.sqrt(2) - TOL

    def test_permutation_map(self):
        model = graph_model(nx.cycle_graph(5))
        shift = permutation_map(model, [1, 2, 3, 4, 0])
        assert invariance_defect(model, [shift]).sup_observed <= 2
        with pytest.raises(InputError):
            permutation_map(model, [0, 0, 1, 2, 3])

    def test_not_an_isometry(self):
        with pytest.raises(InputError):
            invariance_defect(l1_lattice_model(2, 3), [affine_map([[2, 0], [0, 1]])])


class TestTransport:
    def test_identity(self):
        model = l1_lattice_model(2, 3)
        qi = QuasiIsometryPair.identity(model)
        assert qi.multiplicative == 1.0
        assert qi.additive == 0.0
        assert closeness_distance(pushforward(qi, model), model).sup_observed == 0

    def test_halving_constants(self):
        qi = halving_pair()
        assert qi.roundtrip_source == 1
        assert qi.roundtrip_target == 0
        assert qi.multiplicative >= 2
        data = qi.to_dict()
        assert data["source"] == qi.source.name
        assert data["additive"] >= 1

    def test_push_matches_native(self):
        qi = halving_pair()
        pushed = pushforward(qi, qi.source)
        assert closeness_distance(pushed, qi.target).sup_observed == 0
        assert pushed.declared_k == pytest.approx(qi.multiplicative ** 2)

    def test_pull_is_close_to_native(self):
        qi = halving_pair()
        pulled = pullback(qi, qi.target)
        assert 0 < closeness_distance(pulled, qi.source).sup_observed <= 1

    def test_roundtrip_within_bound(self):
        qi = halving_pair()
        back = pullback(qi, pushforward(qi, qi.source))
        bound = transport_roundtrip_bound(qi, qi.source)
        assert bound == pytest.approx(4.0)
        assert closeness_distance(back, qi.source).sup_observed <= bound

    def test_inverse_and_compose(self):
        qi = halving_pair()
        inverse = qi.inverse()
        assert inverse.source is qi.target
        assert inverse.roundtrip_source == qi.roundtrip_target
        composed = qi.compose(QuasiIsometryPair.identity(qi.target))
        assert composed.target is qi.target
        assert composed.forward((5,)) == (2,)

    def test_from_maps(self):
        source, target = l1_lattice_model(1, 2), l1_lattice_model(1, 2)
        flip = {(0,): (1,), (1,): (0,)}
        qi = QuasiIsometryPair.from_maps(source, target, flip, flip)
        assert qi.additive == 0
        with pytest.raises(InputError):
            qi.forward((7,))

    def test_wrong_carrier(self):
        qi = halving_pair()
        with pytest.raises(InputError):
            pushforward(qi, qi.target)
        with pytest.raises(InputError):
            pullback(qi, qi.source)

    def test_pushed_parameters_are_measured(self):
        qi = halving_pair()
        params = pushforward(qi, qi.source).params
        assert params.exhaustive
        assert np.isfinite(params.h0)
