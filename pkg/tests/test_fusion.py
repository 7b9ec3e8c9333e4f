import numpy as np
import pytest

from reviewfuse import autograd as ag
from reviewfuse.autograd import Tensor, grad_check
from reviewfuse.errors import DimensionError
from reviewfuse.fusion import (
    FusionConfig,
    classify,
    classify_batch,
    fuse,
    init_fusion,
    paper_scale_fusion_config,
    predict_label,
)


def desk_cfg():
    return FusionConfig(d_text=32, d_img=64, d_hidden=32, dropout_p=0.3)


class TestFuse:
    def test_paper_scale_2816(self):
        cfg = paper_scale_fusion_config()
        out = fuse(Tensor(np.zeros(768, dtype=np.float32)),
                   Tensor(np.zeros(2048, dtype=np.float32)), cfg)
        assert out.shape == (2816,)
        assert cfg.d_hidden == 512

    def test_desk_default_96(self):
        cfg = desk_cfg()
        out = fuse(Tensor(np.zeros(32, dtype=np.float32)),
                   Tensor(np.zeros(64, dtype=np.float32)), cfg)
        assert out.shape == (96,)

    def test_text_features_first(self):
        cfg = FusionConfig(d_text=3, d_img=2)
        t = Tensor(np.array([1.0, 2.0, 3.0], dtype=np.float32))
        i = Tensor(np.array([9.0, 8.0], dtype=np.float32))
        out = fuse(t, i, cfg)
        np.testing.assert_array_equal(out.data[:3], t.data)

    def test_length_mismatch(self):
        cfg = desk_cfg()
        with pytest.raises(DimensionError):
            fuse(Tensor(np.zeros(31, dtype=np.float32)),
                 Tensor(np.zeros(64, dtype=np.float32)), cfg)


class TestClassify:
    def test_zero_weights_give_even_logits(self):
        cfg = desk_cfg()
        p = init_fusion(cfg, np.random.default_rng(0))
        for t in p.values():
            t.data[:] = 0.0
        logits = classify(p, cfg, Tensor(np.ones(96, dtype=np.float32)))
        np.testing.assert_array_equal(logits.data, [0.0, 0.0])
        probs = ag.softmax(logits).data
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_eval_deterministic_bitwise(self):
        cfg = desk_cfg()
        p = init_fusion(cfg, np.random.default_rng(1))
        x = Tensor(np.random.default_rng(2).normal(size=96).astype(np.float32))
        a = classify(p, cfg, x, training=False).data
        b = classify(p, cfg, x, training=False).data
        np.testing.assert_array_equal(a, b)

    def test_gradcheck_f32_against_f64_oracle(self):
        cfg = FusionConfig(d_text=4, d_img=3, d_hidden=5, dropout_p=0.0)
        p64 = init_fusion(cfg, np.random.default_rng(3), dtype=np.float64)
        p32 = {k: Tensor(v.data.astype(np.float32), requires_grad=True)
               for k, v in p64.items()}
        x = np.random.default_rng(4).normal(size=(2, 7))

        def f(params, dtype):
            logits = classify_batch(params, cfg, Tensor(x.astype(dtype)))
            return ag.cross_entropy(logits, [0, 1])

        err = grad_check(lambda: f(p32, np.float32), p32.values(),
                         fd_f=lambda: f(p64, np.float64),
                         fd_params=p64.values())
        assert err < 1e-3

    def test_gradcheck_f64(self):
        cfg = FusionConfig(d_text=4, d_img=3, d_hidden=5, dropout_p=0.0)
        p = init_fusion(cfg, np.random.default_rng(5), dtype=np.float64)
        x = Tensor(np.random.default_rng(6).normal(size=(3, 7)),
                   requires_grad=True)
        err = grad_check(
            lambda: ag.cross_entropy(classify_batch(p, cfg, x), [0, 1, 1]),
            list(p.values()) + [x])
        assert err < 1e-6

    def test_dimension_mismatch(self):
        cfg = desk_cfg()
        p = init_fusion(cfg, np.random.default_rng(7))
        with pytest.raises(DimensionError):
            classify(p, cfg, Tensor(np.zeros(95, dtype=np.float32)))

    def test_linear_region_linearity(self):
        # with dropout off and all hidden pre-activations positive the head
        # is linear in its input
        cfg = FusionConfig(d_text=2, d_img=2, d_hidden=3, dropout_p=0.0)
        p = init_fusion(cfg, np.random.default_rng(8))
        p["head.b1"].data[:] = 10.0  # push hidden units into the linear region
        x1 = np.random.default_rng(9).normal(size=4).astype(np.float32) * 0.1
        x2 = np.random.default_rng(10).normal(size=4).astype(np.float32) * 0.1
        f = lambda arr: classify(p, cfg, Tensor(arr)).data
        lhs = f(x1 + x2) + f(np.zeros(4, dtype=np.float32)) * 0
        rhs = f(x1) + f(x2) - f(np.zeros(4, dtype=np.float32))
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)

    def test_softmax_of_logits_sums_to_one(self):
        cfg = desk_cfg()
        p = init_fusion(cfg, np.random.default_rng(11))
        x = Tensor(np.random.default_rng(12).normal(size=96).astype(np.float32))
        probs = ag.softmax(classify(p, cfg, x)).data
        assert abs(probs.sum() - 1.0) < 1e-6


class TestPredictLabel:
    def test_argmax(self):
        assert predict_label(np.array([0.2, 1.7])) == 1

    def test_tie_goes_to_fake(self):
        assert predict_label(np.array([3.0, 3.0])) == 0

    def test_shift_invariance_sweep(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            logits = rng.normal(size=2)
            c = rng.normal() * 100
            assert predict_label(logits) == predict_label(logits + c)
