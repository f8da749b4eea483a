import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agssp import oracles, scoring
from agssp.errors import (
    DegenerateMean,
    DimensionMismatch,
    EmptyField,
    EmptyMap,
    SizeMismatch,
    ZeroVector,
)
from agssp.scoring import (
    MemoryBank,
    PatchTokenSet,
    PromptSpec,
    ScoringConfig,
    TextEmbeddingSet,
)


def _unit_rows(mat):
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def _tokens(layers, grid, cls=None):
    layers = np.asarray(layers, dtype=np.float64)
    if cls is None:
        cls = layers[0, 0]
    return PatchTokenSet(layers=layers, cls=np.asarray(cls), grid=grid)


# --- prompts ---


def test_build_prompt_template():
    spec = PromptSpec("steel pipe", "scratch", "a thin bright line")
    assert (
        scoring.build_prompt(spec)
        == "A photo of steel pipe with scratch defect, it appears as a thin bright line."
    )


def test_build_prompt_substitutes_object():
    spec = PromptSpec("casting billet", "crack", "a dark jagged line")
    assert scoring.build_prompt(spec).startswith("A photo of casting billet with crack defect")


def test_build_prompt_empty_field():
    with pytest.raises(EmptyField):
        scoring.build_prompt(PromptSpec("steel pipe", "scratch", ""))


# --- text token averaging ---


def test_average_single_row_is_identity():
    row = _unit_rows(np.array([[3.0, 4.0, 0.0]]))
    np.testing.assert_allclose(scoring.average_text_tokens(row), row[0], atol=1e-15)


def test_average_of_opposites_degenerates():
    mat = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(DegenerateMean):
        scoring.average_text_tokens(mat)


def test_average_two_basis_vectors():
    mat = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    expected = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
    np.testing.assert_allclose(scoring.average_text_tokens(mat), expected, atol=1e-15)


# --- scoring function ---


def test_score_equal_similarities_is_half():
    token = np.array([0.6, 0.8, 0.0])
    feature = np.array([0.0, 0.0, 1.0])
    assert abs(scoring.anomaly_score(feature, token, token, tau=0.07) - 0.5) < 1e-12


def test_score_opposite_tokens_tau_one():
    # cos(f, t-) = 1, cos(f, t+) = -1 at tau 1 gives 1/(1 + e^-2)
    f = np.array([1.0, 0.0])
    expected = 1.0 / (1.0 + math.exp(-2.0))
    assert expected == pytest.approx(0.8807970779778823, abs=1e-15)
    got = scoring.anomaly_score(f, -f, f, tau=1.0)
    assert got == pytest.approx(expected, abs=1e-12)


def test_score_sharp_temperature_saturates():
    # cosines 0.4 / 0.6 at tau 0.01 give 1/(1 + e^-20), i.e. 1.0 within 1e-8
    t_pos = np.array([1.0, 0.0, 0.0])
    t_neg = np.array([0.0, 1.0, 0.0])
    f = np.array([0.4, 0.6, math.sqrt(1.0 - 0.4**2 - 0.6**2)])
    got = scoring.anomaly_score(f, t_pos, t_neg, tau=0.01)
    assert got == pytest.approx(1.0, abs=1e-8)
    assert got == pytest.approx(1.0 / (1.0 + math.exp(-20.0)), abs=1e-12)


def test_score_zero_vector_rejected():
    with pytest.raises(ZeroVector):
        scoring.anomaly_score(np.zeros(3), np.ones(3), np.ones(3), tau=1.0)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_score_swap_antisymmetry(data):
    dim = data.draw(st.integers(2, 8))
    draw_vec = st.lists(
        st.floats(-1, 1, allow_nan=False).filter(lambda v: abs(v) > 1e-3),
        min_size=dim,
        max_size=dim,
    )
    f = np.array(data.draw(draw_vec))
    a = np.array(data.draw(draw_vec))
    b = np.array(data.draw(draw_vec))
    tau = data.draw(st.floats(0.01, 5.0))
    s1 = scoring.anomaly_score(f, a, b, tau)
    s2 = scoring.anomaly_score(f, b, a, tau)
    assert abs(s1 + s2 - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_score_scale_invariant_in_feature(scale, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(6)
    a = rng.standard_normal(6)
    b = rng.standard_normal(6)
    assert scoring.anomaly_score(f, a, b, 0.07) == pytest.approx(
        scoring.anomaly_score(f * scale, a, b, 0.07), abs=1e-12
    )


def test_score_monotone_in_anomaly_similarity():
    # fixed cos(f, t+), increasing cos(f, t-) must raise the score
    f = np.array([1.0, 0.0, 0.0])
    t_pos = np.array([0.0, 1.0, 0.0])
    previous = -1.0
    for angle in np.linspace(0.1, 3.1, 15):
        t_neg = np.array([math.cos(angle), 0.0, math.sin(angle)])
        score = scoring.anomaly_score(f, t_pos, t_neg, tau=0.2)
        assert score < previous or previous == -1.0
        previous = score


# --- image score ---


def _text_set(dim=4):
    normal = np.zeros((1, dim))
    normal[0, 0] = 1.0
    anomaly = np.zeros((2, dim))
    anomaly[0, 1] = 1.0
    anomaly[1, 1] = 1.0
    return TextEmbeddingSet(normal=normal, anomaly=anomaly, category_id=1)


def test_image_score_equidistant_cls():
    text = _text_set()
    cls = np.array([0.0, 0.0, 1.0, 0.0])
    layers = np.tile(cls, (4, 4, 1))
    tokens = _tokens(layers, grid=(2, 2), cls=cls)
    cfg = ScoringConfig()
    assert scoring.image_score(tokens, text, cfg) == pytest.approx(0.5, abs=1e-12)


def test_image_score_anomalous_cls():
    text = _text_set()
    cls = np.array([0.0, 1.0, 0.0, 0.0])  # equals the anomaly token
    layers = np.tile(cls, (4, 4, 1))
    tokens = _tokens(layers, grid=(2, 2), cls=cls)
    got = scoring.image_score(tokens, text, ScoringConfig(tau=0.07))
    expected = scoring.anomaly_score(cls, text.normal[0], text.anomaly[0], 0.07)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got > 0.999


def test_image_score_dimension_mismatch():
    text = _text_set(dim=5)
    cls = np.array([0.0, 1.0, 0.0, 0.0])
    tokens = _tokens(np.tile(cls, (4, 4, 1)), grid=(2, 2), cls=cls)
    with pytest.raises(DimensionMismatch):
        scoring.image_score(tokens, text, ScoringConfig())


# --- bilinear resize ---


def test_resize_identity_is_copy():
    src = np.random.default_rng(0).random((5, 7))
    out = scoring.bilinear_resize(src, (5, 7))
    assert out is not src
    np.testing.assert_array_equal(out, src)


def test_resize_single_pixel_is_constant():
    out = scoring.bilinear_resize(np.array([[0.7]]), (4, 6))
    np.testing.assert_allclose(out, 0.7)


def test_resize_2x2_to_3x3_hand_values():
    # half-pixel-center sampling of [[0,1],[1,0]] evaluated by hand
    src = np.array([[0.0, 1.0], [1.0, 0.0]])
    expected = np.array([[0.0, 0.5, 1.0], [0.5, 0.5, 0.5], [1.0, 0.5, 0.0]])
    out = scoring.bilinear_resize(src, (3, 3))
    np.testing.assert_allclose(out, expected, atol=1e-15)
    np.testing.assert_allclose(oracles.bilinear_reference(src, (3, 3)), expected, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(1, 6),
    st.integers(1, 9),
    st.integers(1, 9),
    st.integers(0, 2**32 - 1),
)
def test_resize_matches_reference_and_stays_in_range(in_h, in_w, out_h, out_w, seed):
    src = np.random.default_rng(seed).random((in_h, in_w))
    out = scoring.bilinear_resize(src, (out_h, out_w))
    ref = oracles.bilinear_reference(src, (out_h, out_w))
    np.testing.assert_allclose(out, ref, atol=1e-12)
    assert out.min() >= src.min() - 1e-12
    assert out.max() <= src.max() + 1e-12


# --- zero-shot map ---


def test_zero_shot_uniform_when_equidistant():
    text = _text_set()
    patch = np.array([0.0, 0.0, 1.0, 0.0])
    tokens = _tokens(np.tile(patch, (4, 4, 1)), grid=(2, 2))
    out = scoring.zero_shot_map(tokens, text, ScoringConfig(), out_size=(6, 6))
    np.testing.assert_allclose(out, 0.5, atol=1e-12)


def test_zero_shot_fusion_identity_for_identical_layers():
    text = _text_set()
    rng = np.random.default_rng(3)
    one_layer = _unit_rows(rng.standard_normal((9, 4)))
    tokens = _tokens(np.tile(one_layer, (4, 1, 1)), grid=(3, 3))
    fused = scoring.zero_shot_map(tokens, text, ScoringConfig(), out_size=(3, 3))
    single = scoring.zero_shot_map(
        tokens, text, ScoringConfig(fusion_layers=(0,)), out_size=(3, 3)
    )
    np.testing.assert_allclose(fused, single, atol=1e-12)
    assert fused.min() >= 0.0 and fused.max() <= 1.0


def test_zero_shot_hot_patch_dominates_its_quadrant():
    text = _text_set()
    layers = np.tile(text.normal[0], (4, 4, 1))
    layers[:, 3, :] = text.anomaly[0]  # bottom-right patch of the 2x2 grid
    tokens = _tokens(layers, grid=(2, 2))
    out = scoring.zero_shot_map(tokens, text, ScoringConfig(), out_size=(4, 4))
    # compare against the naive per-patch score + reference resize
    per_patch = np.array(
        [
            scoring.anomaly_score(p, text.normal[0], text.anomaly[0], 0.07)
            for p in layers[0]
        ]
    ).reshape(2, 2)
    ref = oracles.bilinear_reference(per_patch, (4, 4))
    np.testing.assert_allclose(out, ref, atol=1e-12)
    assert np.unravel_index(out.argmax(), out.shape) == (3, 3)


# --- few-shot map ---


def test_few_shot_verbatim_token_scores_zero():
    rng = np.random.default_rng(5)
    refs = _unit_rows(rng.standard_normal((6, 8)))
    layers = np.stack([refs[:4], refs[:4], refs[:4], refs[:4]])
    tokens = _tokens(layers, grid=(2, 2))
    bank = MemoryBank(per_layer=[refs] * 4, k=1)
    out = scoring.few_shot_map(tokens, bank, out_size=(2, 2))
    assert np.all(out == 0.0)


def test_few_shot_orthogonal_token_scores_half():
    refs = np.eye(8)[:2]
    patch = np.eye(8)[4]
    layers = np.tile(patch, (4, 4, 1))
    tokens = _tokens(layers, grid=(2, 2))
    bank = MemoryBank(per_layer=[refs] * 4, k=1)
    out = scoring.few_shot_map(tokens, bank, out_size=(2, 2))
    np.testing.assert_allclose(out, 0.5, atol=1e-7)


def test_few_shot_opposite_token_scores_one():
    ref = np.eye(4)[:1]
    layers = np.tile(-ref[0], (4, 1, 1))
    tokens = _tokens(layers, grid=(1, 1))
    bank = MemoryBank(per_layer=[ref] * 4, k=1)
    out = scoring.few_shot_map(tokens, bank, out_size=(1, 1))
    np.testing.assert_allclose(out, 1.0, atol=1e-12)


def test_few_shot_single_bank_uses_final_layer():
    refs = np.eye(4)[:1]
    layers = np.tile(np.eye(4)[1], (4, 1, 1))
    layers[3, 0] = refs[0]  # only the final layer matches the bank
    tokens = _tokens(layers, grid=(1, 1))
    out = scoring.few_shot_map(tokens, MemoryBank(per_layer=[refs]), out_size=(1, 1))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_few_shot_dimension_mismatch():
    tokens = _tokens(np.tile(np.eye(4)[0], (4, 1, 1)), grid=(1, 1))
    with pytest.raises(DimensionMismatch):
        scoring.few_shot_map(tokens, MemoryBank(per_layer=[np.eye(6)[:2]] * 4), (1, 1))


# --- combination and final score ---


def test_combined_map_additive_identity():
    rng = np.random.default_rng(11)
    zero = rng.random((4, 4))
    np.testing.assert_array_equal(scoring.combined_map(zero, np.zeros((4, 4))), zero)


def test_combined_map_uniform_halves():
    half = np.full((3, 3), 0.5)
    np.testing.assert_allclose(scoring.combined_map(half, half), 1.0)


def test_combined_map_matches_elementwise_add():
    rng = np.random.default_rng(12)
    a, b = rng.random((5, 6)), rng.random((5, 6))
    np.testing.assert_array_equal(scoring.combined_map(a, b), a + b)


def test_combined_map_size_mismatch():
    with pytest.raises(SizeMismatch):
        scoring.combined_map(np.zeros((2, 2)), np.zeros((3, 2)))


def test_final_score_zero_map():
    assert scoring.final_score(np.zeros((3, 3)), 0.3) == pytest.approx(0.3)


def test_final_score_adds_max():
    m = np.zeros((2, 2))
    m[1, 0] = 0.9
    assert scoring.final_score(m, 0.6) == pytest.approx(1.5)


def test_final_score_random_vs_scan():
    rng = np.random.default_rng(13)
    m = rng.random((7, 9))
    best = -1.0
    for row in m:
        for v in row:
            best = max(best, v)
    assert scoring.final_score(m, 0.25) == pytest.approx(best + 0.25, abs=1e-15)


def test_final_score_empty_map():
    with pytest.raises(EmptyMap):
        scoring.final_score(np.zeros((0, 4)), 0.1)
