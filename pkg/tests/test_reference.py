import numpy as np
import pytest

from gnnflow.graphs import EdgeList, build_csr, pseudo_coordinates
from gnnflow.params import (MODELS, Dims, GcnParams, GinParams,
                            MonetParams, SageParams, gen_edge_features,
                            gen_features, gen_params)
from gnnflow.reference import (DimensionError, activation, elu, forward,
                               gat_forward, gatedgcn_forward, gaussian_weights,
                               gcn_forward, gin_forward, leaky_relu,
                               monet_forward, relu, sage_forward, vmm)

import oracles
from conftest import assert_close, make_graph, small_dims

F32 = np.float32


def line_graph():
    return build_csr(EdgeList(3, [(0, 1), (1, 2)]))


class TestVmm:
    def test_identity(self, rng):
        x = rng.normal(size=6).astype(F32)
        np.testing.assert_array_equal(vmm(x, np.eye(6, dtype=F32)), x)

    def test_zeros(self, rng):
        x = rng.normal(size=4).astype(F32)
        np.testing.assert_array_equal(vmm(x, np.zeros((3, 4), dtype=F32)),
                                      np.zeros(3, dtype=F32))

    def test_matches_scalar_loop_exactly(self, rng):
        M = rng.normal(size=(5, 5)).astype(F32)
        x = rng.normal(size=5).astype(F32)
        want = np.zeros(5, dtype=F32)
        for c in range(5):
            for r in range(5):
                want[r] = want[r] + M[r, c] * x[c]
        np.testing.assert_array_equal(vmm(x, M), want)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            vmm(np.zeros(3, dtype=F32), np.zeros((2, 4), dtype=F32))


class TestActivations:
    def test_relu(self):
        assert activation("relu", -3.0) == 0.0
        assert activation("relu", 2.5) == F32(2.5)

    def test_elu_zero(self):
        assert activation("elu", 0.0) == 0.0
        assert activation("elu", -1.0) == pytest.approx(np.expm1(-1.0), rel=1e-6)

    def test_leaky(self):
        assert activation("leaky_relu", -2.0, slope=0.2) == pytest.approx(-0.4)

    def test_sigmoid_tanh(self):
        assert activation("sigmoid", 0.0) == pytest.approx(0.5)
        assert activation("tanh", 0.0) == 0.0
        assert activation("sigmoid", -100.0) == pytest.approx(0.0, abs=1e-30)


class TestGcn:
    def test_isolated_node_zero_row(self):
        g = line_graph()
        p = gen_params("gcn", Dims(4), 0)
        H = gen_features(3, 4, 1)
        out = gcn_forward(g, H, p)
        np.testing.assert_array_equal(out[0], np.zeros(4, dtype=F32))

    def test_identity_single_edge(self):
        g = line_graph()
        H = gen_features(3, 4, 1)
        out = gcn_forward(g, H, GcnParams(U=np.eye(4, dtype=F32)))
        np.testing.assert_array_equal(out[1], relu(H[0]))

    def test_dense_oracle(self, rng):
        edges = [(int(rng.integers(4)), int(rng.integers(4))) for _ in range(6)]
        g = build_csr(EdgeList(4, edges))
        p = gen_params("gcn", Dims(8), 3)
        H = gen_features(4, 8, 4)
        assert_close(gcn_forward(g, H, p), oracles.gcn(g, H, p), rtol=1e-6)


class TestSage:
    def test_isolated_identity(self):
        g = line_graph()
        H = gen_features(3, 4, 2)
        p = SageParams(V=np.eye(4, dtype=F32), W=np.zeros((4, 4), dtype=F32))
        out = sage_forward(g, H, p)
        np.testing.assert_array_equal(out[0], relu(H[0]))

    def test_single_neighbor_mean(self):
        g = line_graph()
        H = gen_features(3, 4, 2)
        p = SageParams(V=np.zeros((4, 4), dtype=F32), W=np.eye(4, dtype=F32))
        out = sage_forward(g, H, p)
        np.testing.assert_array_equal(out[1], relu(H[0]))

    def test_dense_oracle(self):
        g = make_graph("powerlaw", 12, 3, 8)
        p = gen_params("sage", Dims(8), 5)
        H = gen_features(12, 8, 6)
        assert_close(sage_forward(g, H, p), oracles.sage(g, H, p), rtol=1e-6)


class TestGin:
    def test_no_neighbors_identity(self):
        g = line_graph()
        H = gen_features(3, 4, 3)
        p = GinParams(U=np.eye(4, dtype=F32), V=np.eye(4, dtype=F32), eps=0.0)
        np.testing.assert_array_equal(gin_forward(g, H, p)[0], relu(H[0]))

    def test_eps_minus_one_zeroes_isolated(self):
        g = line_graph()
        H = gen_features(3, 4, 3)
        p = GinParams(U=np.eye(4, dtype=F32), V=np.eye(4, dtype=F32), eps=-1.0)
        np.testing.assert_array_equal(gin_forward(g, H, p)[0],
                                      np.zeros(4, dtype=F32))

    def test_dense_oracle(self):
        g = make_graph("regular", 10, 3, 4)
        p = gen_params("gin", Dims(8), 7)
        H = gen_features(10, 8, 8)
        assert_close(gin_forward(g, H, p), oracles.gin(g, H, p), rtol=1e-6)


class TestGat:
    def test_single_neighbor_alpha_is_one(self):
        g = line_graph()
        dims = Dims(4, 2, 3)
        p = gen_params("gat", dims, 9)
        H = gen_features(3, 4, 10)
        out = gat_forward(g, H, p)
        z0 = np.stack([vmm(H[0], p.U[k]) for k in range(2)])
        np.testing.assert_allclose(out[1], elu(z0).reshape(-1), rtol=1e-6)

    def test_two_identical_neighbors_half_weights(self):
        g = build_csr(EdgeList(3, [(1, 0), (2, 0)]))
        dims = Dims(4, 2, 3)
        p = gen_params("gat", dims, 11)
        H = gen_features(3, 4, 12)
        H[2] = H[1]
        out = gat_forward(g, H, p)
        z1 = np.stack([vmm(H[1], p.U[k]) for k in range(2)])
        np.testing.assert_allclose(out[0], elu(z1).reshape(-1), rtol=1e-5,
                                   atol=1e-6)

    def test_dense_oracle_and_alpha_sums(self):
        g = make_graph("powerlaw", 5, 2, 13)
        dims = Dims(6, 2, 4)
        p = gen_params("gat", dims, 14)
        H = gen_features(5, 6, 15)
        want, alphas = oracles.gat(g, H, p)
        assert_close(gat_forward(g, H, p), want, rtol=1e-5)
        for i, head_alpha in alphas.items():
            np.testing.assert_allclose(head_alpha.sum(axis=0), 1.0, atol=1e-6)

    def test_empty_row_is_zero(self):
        g = line_graph()
        p = gen_params("gat", Dims(4, 2, 3), 9)
        H = gen_features(3, 4, 10)
        np.testing.assert_array_equal(gat_forward(g, H, p)[0],
                                      np.zeros(6, dtype=F32))


class TestMonet:
    def test_weight_peak_at_mean(self):
        u = np.array([[0.3, -0.2]], dtype=F32)
        mu = np.array([[0.3, -0.2], [0.0, 0.0]], dtype=F32)
        sig = np.abs(gen_features(2, 2, 3))
        w = gaussian_weights(u, mu, sig)
        assert w[0, 0] == pytest.approx(1.0)

    def test_zero_sigma_inv_gcn_like(self):
        g = line_graph()
        dims = Dims(4, 2)
        p = gen_params("monet", dims, 16)
        p = MonetParams(V2=p.V2, v2=p.v2, mu=p.mu,
                        sigma_inv=np.zeros((2, 2), dtype=F32), U=p.U)
        H = gen_features(3, 4, 17)
        out = monet_forward(g, H, p)
        # all weights collapse to 1: plain per-head neighbor sum
        want = np.zeros((3, 4), dtype=F32)
        for i in range(3):
            acc = np.zeros(4, dtype=F32)
            for k in range(2):
                s = np.zeros(4, dtype=F32)
                for j in g.row(i):
                    s += H[j]
                acc += vmm(s, p.U[k])
            want[i] = relu(acc)
        assert_close(out, want, rtol=1e-6)

    def test_unhoisted_oracle_agreement(self):
        g = make_graph("powerlaw", 8, 2, 18)
        dims = Dims(6, 2)
        p = gen_params("monet", dims, 19)
        H = gen_features(8, 6, 20)
        want = oracles.monet_unhoisted(g, H, p, pseudo_coordinates(g))
        assert_close(monet_forward(g, H, p), want, rtol=1e-5)

    def test_weights_in_unit_interval(self):
        u = gen_features(50, 2, 21)
        mu = gen_features(3, 2, 22)
        sig = np.abs(gen_features(3, 2, 23))
        w = gaussian_weights(u, mu, sig)
        assert np.all(w > 0) and np.all(w <= 1)


class TestGatedGcn:
    def test_no_neighbors(self):
        g = line_graph()
        d = 4
        p = gen_params("gatedgcn", Dims(d), 24)
        H = gen_features(3, d, 25)
        ef = gen_edge_features(2, d, 26)
        out, _ = gatedgcn_forward(g, H, ef, p)
        np.testing.assert_array_equal(out[0], relu(vmm(H[0], p.A)))

    def test_gate_saturation(self):
        # one edge into node 1; huge positive edge features saturate the gate
        g = line_graph()
        d = 4
        p = gen_params("gatedgcn", Dims(d), 27)
        C = np.eye(d, dtype=F32)
        p = type(p)(A=p.A, B=p.B, C=C, D=np.zeros((d, d), dtype=F32),
                    E=np.zeros((d, d), dtype=F32), eps_stab=p.eps_stab)
        H = gen_features(3, d, 28)
        ef = np.full((2, d), 80.0, dtype=F32)
        out, _ = gatedgcn_forward(g, H, ef, p)
        want = relu(vmm(H[1], p.A) + vmm(H[0], p.B) / F32(1.0 + p.eps_stab))
        assert_close(out[1], want, rtol=1e-5)

    def test_dense_oracle(self):
        g = make_graph("regular", 9, 3, 29)
        d = 8
        p = gen_params("gatedgcn", Dims(d), 30)
        H = gen_features(9, d, 31)
        ef = gen_edge_features(g.num_edges, d, 32)
        want_h, want_e = oracles.gatedgcn(g, H, ef, p)
        got_h, got_e = gatedgcn_forward(g, H, ef, p)
        assert_close(got_h, want_h, rtol=1e-5)
        assert_close(got_e, want_e, rtol=1e-5)

    def test_requires_edge_features(self):
        g = line_graph()
        p = gen_params("gatedgcn", Dims(4), 1)
        H = gen_features(3, 4, 2)
        with pytest.raises(DimensionError):
            forward("gatedgcn", g, H, p)


class TestCrossCutting:
    @pytest.mark.parametrize("model", MODELS)
    def test_relu_layers_nonnegative(self, model):
        if model == "gat":
            pytest.skip("ELU output may be negative by design")
        g = make_graph("powerlaw", 20, 3, 33)
        dims = small_dims(model)
        p = gen_params(model, dims, 34)
        H = gen_features(20, dims.in_dim, 35)
        ef = (gen_edge_features(g.num_edges, dims.in_dim, 36)
              if model == "gatedgcn" else None)
        out = forward(model, g, H, p, ef)
        nodes = out[0] if model == "gatedgcn" else out
        assert np.all(nodes >= 0)

    @pytest.mark.parametrize("model", MODELS)
    def test_all_outputs_finite(self, model):
        g = make_graph("powerlaw", 25, 4, 37)
        dims = small_dims(model)
        p = gen_params(model, dims, 38)
        H = gen_features(25, dims.in_dim, 39)
        ef = (gen_edge_features(g.num_edges, dims.in_dim, 40)
              if model == "gatedgcn" else None)
        out = forward(model, g, H, p, ef)
        arrays = out if isinstance(out, tuple) else (out,)
        for a in arrays:
            assert np.all(np.isfinite(a))

    def test_exhaustive_three_node_template(self):
        # every directed-pair subset (with self-loops) of a 3-node template
        pairs = [(s, d) for s in range(3) for d in range(3)]
        dims = {m: small_dims(m, 4) for m in MODELS}
        ps = {m: gen_params(m, dims[m], 41) for m in MODELS}
        Hs = gen_features(3, 4, 42)
        for mask in range(512):
            edges = [pairs[b] for b in range(9) if mask & (1 << b)]
            g = build_csr(EdgeList(3, edges))
            for model in MODELS:
                ef = (gen_edge_features(g.num_edges, 4, 43)
                      if model == "gatedgcn" else None)
                got = forward(model, g, Hs, ps[model], ef)
                if model == "gcn":
                    want = oracles.gcn(g, Hs, ps[model])
                elif model == "sage":
                    want = oracles.sage(g, Hs, ps[model])
                elif model == "gin":
                    want = oracles.gin(g, Hs, ps[model])
                elif model == "gat":
                    want = oracles.gat(g, Hs, ps[model])[0]
                elif model == "monet":
                    want = oracles.monet_unhoisted(g, Hs, ps[model],
                                                   pseudo_coordinates(g))
                else:
                    got = got[0]
                    want = oracles.gatedgcn(g, Hs, ef, ps[model])[0]
                assert_close(got, want, rtol=1e-5)

    @pytest.mark.parametrize("model", ["gcn", "sage", "gin"])
    def test_neighbor_permutation_stability(self, model, rng):
        # d = 128 is the largest shipped width the reassociation bound covers
        from gnnflow.graphs import CsrGraph
        g = make_graph("powerlaw", 30, 4, 44)
        dims = Dims(128)
        p = gen_params(model, dims, 45)
        H = gen_features(30, 128, 46)
        base = forward(model, g, H, p)

        cols = g.col_indices.copy()
        for i in range(g.num_nodes):
            lo, hi = int(g.row_offsets[i]), int(g.row_offsets[i + 1])
            seg = cols[lo:hi]
            rng.shuffle(seg)
            cols[lo:hi] = seg
        g2 = CsrGraph.from_arrays(30, g.row_offsets, cols, validate=False)
        perm = forward(model, g2, H, p)

        denom = np.maximum(np.abs(base), 1.0)
        assert float((np.abs(base - perm) / denom).max()) <= 1e-4
        assert np.array_equal(base.argmax(axis=1), perm.argmax(axis=1))
