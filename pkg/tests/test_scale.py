import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedgate.errors import (
    BadSchedule,
    ClickOutOfBounds,
    EmptyInput,
    MissingFixture,
    ShapeMismatch,
    TooFewCandidates,
)
from seedgate.maps import minmax_normalize
from seedgate.scale import (
    AttributionIngredients,
    InteractionSpec,
    ScaleCandidate,
    aggregate_layers,
    build_crop_pyramid,
    layer_attribution,
    psi_normalize,
    run_stage1,
    seed_score,
    select_scale,
    semantic_score,
)


def box_contains(box, p):
    x0, y0, x1, y1 = box
    return x0 <= p[0] < x1 and y0 <= p[1] < y1


class TestCropPyramid:
    def test_centered_no_clipping(self):
        pyr = build_crop_pyramid((100, 100), (50, 50), [1.0, 0.5])
        assert pyr.boxes == ((0, 0, 100, 100), (25, 25, 75, 75))

    def test_clip_by_translation(self):
        pyr = build_crop_pyramid((100, 100), (5, 50), [0.5])
        assert pyr.boxes == ((0, 25, 50, 75),)
        assert box_contains(pyr.boxes[0], (5, 50))

    def test_nested_boxes_contain_click(self):
        p0 = (32, 32)
        pyr = build_crop_pyramid((64, 64), p0, [1.0, 0.8, 0.6, 0.4, 0.2])
        assert len(pyr.boxes) == 5
        for outer, inner in zip(pyr.boxes, pyr.boxes[1:]):
            assert outer[0] <= inner[0] and outer[1] <= inner[1]
            assert inner[2] <= outer[2] and inner[3] <= outer[3]
        for box in pyr.boxes:
            assert box_contains(box, p0)
            assert 0 <= box[0] < box[2] <= 64 and 0 <= box[1] < box[3] <= 64

    def test_min_side(self):
        pyr = build_crop_pyramid((100, 100), (50, 50), [0.5, 0.01])
        x0, y0, x1, y1 = pyr.boxes[1]
        assert x1 - x0 == 8 and y1 - y0 == 8

    def test_click_out_of_bounds(self):
        with pytest.raises(ClickOutOfBounds):
            build_crop_pyramid((100, 100), (100, 50), [1.0])
        with pytest.raises(ClickOutOfBounds):
            build_crop_pyramid((100, 100), (50, -1), [1.0])

    @pytest.mark.parametrize("schedule", [[], [0.5, 0.5], [0.4, 0.6], [1.2, 0.5], [0.5, 0.0]])
    def test_bad_schedules(self, schedule):
        with pytest.raises(BadSchedule):
            build_crop_pyramid((100, 100), (50, 50), schedule)

    @given(
        st.integers(min_value=0, max_value=63),
        st.integers(min_value=0, max_value=47),
    )
    @settings(max_examples=60, deadline=None)
    def test_every_box_contains_click_and_fits(self, x, y):
        pyr = build_crop_pyramid((48, 64), (x, y), [1.0, 0.7, 0.4, 0.15])
        for box in pyr.boxes:
            assert box_contains(box, (x, y))
            assert 0 <= box[0] < box[2] <= 64
            assert 0 <= box[1] < box[3] <= 48


class TestSemanticScore:
    def test_identical(self):
        assert semantic_score([0.2, 0.5], [0.2, 0.5]) == pytest.approx(1.0)

    def test_antiparallel_clamps(self):
        assert semantic_score([1.0, 0.0], [-1.0, 0.0]) == 0.0

    def test_hand_computed(self):
        assert semantic_score([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974631846, abs=1e-9)


class TestPsiNormalize:
    def test_matches_minmax(self):
        assert psi_normalize([2, 4, 6]) == pytest.approx([0.0, 0.5, 1.0])
        assert psi_normalize([5, 5]).tolist() == [1.0, 1.0]
        assert psi_normalize([-1, 0, 1]) == pytest.approx([0.0, 0.5, 1.0])


class TestLayerAttribution:
    def test_relu_kills_all_negative(self):
        ing = AttributionIngredients(
            layer_id=0,
            channel_weights=np.array([1.0]),
            affinities=np.full(4, 2.0),
            values=np.full((4, 1), -3.0),
            grid=(2, 2),
        )
        assert (layer_attribution(ing) == 0.0).all()

    def test_hand_expansion(self):
        # tokens: [psi=1: 2*3 + 0*9 = 6, psi=0: 0]
        ing = AttributionIngredients(
            layer_id=0,
            channel_weights=np.array([2.0, 0.0]),
            affinities=np.array([7.0, 3.0]),  # minmax -> [1, 0]
            values=np.array([[3.0, 9.0], [5.0, 7.0]]),
            grid=(1, 2),
        )
        assert layer_attribution(ing).tolist() == [[6.0, 0.0]]

    def test_zero_weights(self):
        ing = AttributionIngredients(
            layer_id=0,
            channel_weights=np.zeros(3),
            affinities=np.arange(6, dtype=float),
            values=np.ones((6, 3)),
            grid=(2, 3),
        )
        assert (layer_attribution(ing) == 0.0).all()

    def test_shape_mismatch(self):
        ing = AttributionIngredients(
            layer_id=0,
            channel_weights=np.ones(2),
            affinities=np.ones(4),
            values=np.ones((4, 3)),
            grid=(2, 2),
        )
        with pytest.raises(ShapeMismatch):
            layer_attribution(ing)
        ing.values = np.ones((4, 2))
        ing.grid = (3, 2)
        with pytest.raises(ShapeMismatch):
            layer_attribution(ing)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_output_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        ing = AttributionIngredients(
            layer_id=0,
            channel_weights=rng.normal(size=5),
            affinities=rng.normal(size=12),
            values=rng.normal(size=(12, 5)),
            grid=(3, 4),
        )
        assert (layer_attribution(ing) >= 0.0).all()


class TestAggregateLayers:
    def test_single_map_identity(self):
        m = np.arange(6, dtype=float).reshape(2, 3)
        assert aggregate_layers([m]).tolist() == m.tolist()

    def test_zero_plus_x_halves(self):
        x = np.full((2, 2), 3.0)
        assert aggregate_layers([np.zeros((2, 2)), x]).tolist() == (x / 2).tolist()

    def test_three_constants(self):
        maps = [np.full((2, 2), c) for c in (1.0, 2.0, 3.0)]
        assert (aggregate_layers(maps) == 2.0).all()

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        maps = [rng.uniform(size=(3, 3)) for _ in range(4)]
        base = aggregate_layers(maps)
        assert np.allclose(aggregate_layers(maps[::-1]), base, atol=1e-12)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            aggregate_layers([])
        with pytest.raises(ShapeMismatch):
            aggregate_layers([np.zeros((2, 2)), np.zeros((2, 3))])


class TestSeedScore:
    def test_uniform_map_returns_mean(self):
        c = 0.7
        assert seed_score(np.full((4, 4), c), eps=1e-12) == pytest.approx(c, abs=1e-9)

    def test_one_hot_collapses_to_zero(self):
        m = np.zeros((4, 4))
        m[1, 2] = 1.0
        # entropy of the eps-perturbed one-hot is O(eps), not exactly 0
        assert seed_score(m, eps=1e-8) == pytest.approx(0.0, abs=1e-6)

    def test_hand_computed(self):
        # energy 2, entropy log2/log4 -> product 1
        assert seed_score(np.array([4.0, 4.0, 0.0, 0.0]), eps=1e-8) == pytest.approx(
            1.0, abs=1e-6
        )

    def test_scaling_covariance(self):
        rng = np.random.default_rng(11)
        eps = 1e-8
        for _ in range(25):
            a = rng.uniform(0.05, 1.0, size=(6, 6))
            assert a.sum() >= 1.0
            base = seed_score(a, eps)
            for c in (0.5, 2.0, 10.0):
                scaled = seed_score(c * a, eps)
                assert abs(scaled - c * base) / (c * base) <= 1e-6


class TestSelectScale:
    def _candidates(self, sems, spas):
        return [
            ScaleCandidate(k=i, sigma=1.0 - 0.1 * i, box=(i, i, i + 10, i + 10), s_sem=m, s_spa=p)
            for i, (m, p) in enumerate(zip(sems, spas))
        ]

    def test_degenerate_semantic_channel(self):
        sel = select_scale(self._candidates([0.9, 0.9], [0.2, 0.8]))
        assert sel.k_star == 1

    def test_degenerate_spatial_channel(self):
        sel = select_scale(self._candidates([0.2, 0.8, 0.5], [0.5, 0.5, 0.5]))
        assert sel.k_star == 1

    def test_hand_computed_products(self):
        sel = select_scale(self._candidates([0.1, 0.6, 0.9], [0.9, 0.6, 0.1]))
        assert sel.k_star == 1
        assert [r.product for r in sel.rows] == pytest.approx([0.0, 0.390625, 0.0])
        assert [r.sem_hat for r in sel.rows] == pytest.approx([0.0, 0.625, 1.0])
        assert [r.spa_hat for r in sel.rows] == pytest.approx([1.0, 0.625, 0.0])

    def test_tie_breaks_to_largest_context(self):
        sel = select_scale(self._candidates([0.5, 0.5, 0.5], [0.3, 0.3, 0.3]))
        assert sel.k_star == 0

    def test_too_few(self):
        with pytest.raises(TooFewCandidates):
            select_scale(self._candidates([0.5], [0.5]))

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=8),
        st.floats(min_value=1e-2, max_value=50),
        st.floats(min_value=-10, max_value=10),
        st.booleans(),
    )
    @settings(max_examples=150, deadline=None)
    def test_argmax_invariance_under_affine(self, sems, a, b, transform_sem):
        # quantize so score spreads stay representable after the affine map
        sems = [round(s, 6) for s in sems]
        rng = np.random.default_rng(len(sems))
        spas = rng.uniform(size=len(sems)).tolist()
        base = select_scale(self._candidates(sems, spas))
        if transform_sem:
            sel = select_scale(self._candidates([a * s + b for s in sems], spas))
        else:
            sel = select_scale(self._candidates(sems, [a * s + b for s in spas]))
        assert sel.k_star == base.k_star


class TestRunStage1:
    def _fixtures(self, sem_scores, spa_levels, frame=(64, 64), p0=(32, 32)):
        """Crop embeddings with exact cosines plus flat attribution maps."""
        embeddings = [np.array([c, math.sqrt(1 - c * c), 0.0]) for c in sem_scores]
        ingredients = []
        for level in spa_levels:
            ing = AttributionIngredients(
                layer_id=0,
                channel_weights=np.array([1.0]),
                affinities=np.full(16, 1.0),
                values=np.full((16, 1), level),
                grid=(4, 4),
            )
            ingredients.append([ing])
        return embeddings, ingredients

    def test_constructed_winner(self):
        sems = [0.2, 0.9]
        spas = [0.1, 0.8]  # flat maps: seed score == the level itself
        embeddings, ingredients = self._fixtures(sems, spas)
        text = np.array([1.0, 0.0, 0.0])
        sel = run_stage1(
            embeddings,
            ingredients,
            text,
            InteractionSpec(p0=(32, 32), category="blob"),
            [1.0, 0.5],
            (64, 64),
        )
        # independent recomputation: normalize both channels by hand
        sem_hat = minmax_normalize(sems)
        spa_hat = minmax_normalize([r.s_spa for r in sel.rows])
        products = sem_hat * spa_hat
        assert sel.k_star == int(np.argmax(products)) == 1
        assert [r.s_sem for r in sel.rows] == pytest.approx(sems, abs=1e-6)
        assert [r.s_spa for r in sel.rows] == pytest.approx(spas, abs=1e-6)

    def test_identical_crops_tie_break(self):
        embeddings, ingredients = self._fixtures([0.5, 0.5, 0.5], [0.3, 0.3, 0.3])
        sel = run_stage1(
            embeddings,
            ingredients,
            np.array([1.0, 0.0, 0.0]),
            InteractionSpec(p0=(32, 32), category="blob"),
            [1.0, 0.6, 0.3],
            (64, 64),
        )
        assert sel.k_star == 0

    def test_missing_layer_fixture(self):
        embeddings, ingredients = self._fixtures([0.2, 0.9], [0.1, 0.8])
        ingredients[1] = []
        with pytest.raises(MissingFixture):
            run_stage1(
                embeddings,
                ingredients,
                np.array([1.0, 0.0, 0.0]),
                InteractionSpec(p0=(32, 32), category="blob"),
                [1.0, 0.5],
                (64, 64),
            )

    def test_embedding_count_mismatch(self):
        embeddings, ingredients = self._fixtures([0.2, 0.9], [0.1, 0.8])
        with pytest.raises(MissingFixture):
            run_stage1(
                embeddings[:1],
                ingredients,
                np.array([1.0, 0.0, 0.0]),
                InteractionSpec(p0=(32, 32), category="blob"),
                [1.0, 0.5],
                (64, 64),
            )
