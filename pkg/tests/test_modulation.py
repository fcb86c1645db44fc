import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from glasstryon.modulation import (
    EPS,
    ConditionBranch,
    GammaRangeError,
    ModulationModule,
    fuse,
    modulate,
)


def modulate_oracle(x, alpha, beta):
    """Scalar-loop reference for the conditional instance normalization."""
    out = torch.empty_like(x)
    for i in range(x.shape[0]):
        row = x[i]
        mu = sum(float(v) for v in row) / len(row)
        var = sum((float(v) - mu) ** 2 for v in row) / len(row)
        sigma = math.sqrt(var)
        for j in range(x.shape[1]):
            xn = (float(row[j]) - mu) / (sigma + EPS)
            out[i, j] = (1.0 + float(alpha[i, j])) * xn + float(beta[i, j])
    return out


class TestModulate:
    def test_matches_scalar_oracle(self):
        g = torch.Generator().manual_seed(42)
        # 1,000 random triples in batches of 50 rows x 20 cases
        for case in range(20):
            x = torch.randn(50, 16, generator=g, dtype=torch.float64)
            alpha = torch.randn(50, 16, generator=g, dtype=torch.float64)
            beta = torch.randn(50, 16, generator=g, dtype=torch.float64)
            torch.testing.assert_close(
                modulate(x, alpha, beta), modulate_oracle(x, alpha, beta),
                rtol=1e-6, atol=1e-9,
            )

    def test_zero_params_pure_normalization(self):
        x = torch.randn(4, 512, dtype=torch.float64)
        out = modulate(x, torch.zeros_like(x), torch.zeros_like(x))
        torch.testing.assert_close(out.mean(-1), torch.zeros(4, dtype=torch.float64), atol=1e-9, rtol=0)
        torch.testing.assert_close(out.std(-1, unbiased=False), torch.ones(4, dtype=torch.float64), atol=1e-4, rtol=0)

    def test_constant_input_yields_beta(self):
        x = torch.full((2, 8), 3.0)
        beta = torch.randn(2, 8)
        out = modulate(x, torch.randn(2, 8), beta)
        torch.testing.assert_close(out, beta)


class TestFuse:
    def test_endpoints(self):
        am, bm = torch.randn(2, 8), torch.randn(2, 8)
        at, bt = torch.randn(2, 8), torch.randn(2, 8)
        a0, b0 = fuse(am, bm, at, bt, 0.0)
        assert torch.equal(a0, am) and torch.equal(b0, bm)
        a1, b1 = fuse(am, bm, at, bt, 1.0)
        assert torch.equal(a1, at) and torch.equal(b1, bt)

    @given(gamma=st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=25, deadline=None)
    def test_convexity(self, gamma):
        am, bm = torch.ones(1, 4), torch.zeros(1, 4)
        at, bt = -torch.ones(1, 4), 2 * torch.ones(1, 4)
        a, b = fuse(am, bm, at, bt, gamma)
        torch.testing.assert_close(a, torch.full((1, 4), 1.0 - 2.0 * gamma))
        torch.testing.assert_close(b, torch.full((1, 4), 2.0 * gamma))

    def test_midpoint_linearity(self):
        g = torch.Generator().manual_seed(1)
        am, bm, at, bt = (torch.randn(3, 16, generator=g, dtype=torch.float64) for _ in range(4))
        a_lo, b_lo = fuse(am, bm, at, bt, 0.25)
        a_hi, b_hi = fuse(am, bm, at, bt, 0.75)
        a_mid, b_mid = fuse(am, bm, at, bt, 0.5)
        torch.testing.assert_close((a_lo + a_hi) / 2, a_mid, rtol=1e-6, atol=1e-12)
        torch.testing.assert_close((b_lo + b_hi) / 2, b_mid, rtol=1e-6, atol=1e-12)

    @pytest.mark.parametrize("gamma", [-0.1, 1.1, 5.0])
    def test_out_of_range(self, gamma):
        z = torch.zeros(1, 4)
        with pytest.raises(GammaRangeError):
            fuse(z, z, z, z, gamma)


class TestConditionBranch:
    def test_output_split(self):
        br = ConditionBranch()
        alpha, beta = br(torch.randn(2, 512))
        assert alpha.shape == (2, 512) and beta.shape == (2, 512)

    def test_zero_init(self):
        br = ConditionBranch()
        br.zero_()
        alpha, beta = br(torch.randn(2, 512))
        assert torch.equal(alpha, torch.zeros(2, 512))
        assert torch.equal(beta, torch.zeros(2, 512))


class TestModulationModule:
    def test_gamma_zero_ignores_text(self):
        mod = ModulationModule()
        x = torch.randn(2, 512)
        e_m = torch.randn(2, 512)
        out1 = mod(x, torch.randn(2, 512), e_m, gamma=0.0)
        out2 = mod(x, torch.randn(2, 512), e_m, gamma=0.0)
        assert torch.equal(out1, out2)

    def test_gamma_one_ignores_mask(self):
        mod = ModulationModule()
        x = torch.randn(2, 512)
        e_t = torch.randn(2, 512)
        out1 = mod(x, e_t, torch.randn(2, 512), gamma=1.0)
        out2 = mod(x, e_t, torch.randn(2, 512), gamma=1.0)
        assert torch.equal(out1, out2)

    def test_dual_branch_requires_mask(self):
        mod = ModulationModule()
        with pytest.raises(ValueError):
            mod(torch.randn(2, 512), torch.randn(2, 512), None)

    def test_text_only_has_no_mask_branch(self):
        mod = ModulationModule(text_only=True)
        assert not hasattr(mod, "mask_branch")
        out = mod(torch.randn(2, 512), torch.randn(2, 512))
        assert out.shape == (2, 512)

    def test_token_inputs_share_condition(self):
        mod = ModulationModule()
        x = torch.randn(2, 4, 512)  # per-layer tokens
        e_t, e_m = torch.randn(2, 512), torch.randn(2, 512)
        out = mod(x, e_t, e_m, gamma=0.5)
        assert out.shape == (2, 4, 512)
        # each token row is modulated with the same (alpha, beta)
        single = mod(x[:, 1], e_t, e_m, gamma=0.5)
        torch.testing.assert_close(out[:, 1], single)
