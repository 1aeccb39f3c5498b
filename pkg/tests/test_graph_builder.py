import numpy as np
import pytest

from olpkit import (
    ChannelMatrix,
    FeatureStats,
    Precoder,
    SolverConfig,
    build_graph,
    deprocess_and_postprocess,
    deprocess_features,
    effective_channel,
    input_features,
    input_features_raw,
    min_sinr,
    node_index,
    permute_graph,
    solve_olp,
    target_features,
    target_features_raw,
)
from olpkit.graph_builder import log_mag_phase
from olpkit.tolerances import TOL

from conftest import make_channel


def edge_set(edges: np.ndarray) -> set[tuple[int, int]]:
    return {tuple(edge) for edge in edges.tolist()}


class TestBuildGraph:
    def test_counts_24_4(self):
        graph = build_graph(24, 4)
        assert graph.num_nodes == 96
        assert graph.edges_ap.shape[0] == 96 * 3
        assert graph.edges_ue.shape[0] == 96 * 23
        assert graph.num_edges == 2496

    def test_single_node(self):
        graph = build_graph(1, 1)
        assert graph.num_nodes == 1
        assert graph.num_edges == 0

    def test_2x2_by_enumeration(self):
        graph = build_graph(2, 2)
        assert graph.num_nodes == 4
        assert graph.num_edges == 8
        # node (m,k)=m*2+k; AP edges join same m, UE edges same k
        assert edge_set(graph.edges_ap) == {(0, 1), (1, 0), (2, 3), (3, 2)}
        assert edge_set(graph.edges_ue) == {(0, 2), (2, 0), (1, 3), (3, 1)}

    @pytest.mark.parametrize("shape", [(1, 5), (5, 1), (3, 4), (6, 2)])
    def test_degree_law_and_symmetry(self, shape):
        m, k = shape
        graph = build_graph(m, k)
        for edges, degree in ((graph.edges_ap, k - 1), (graph.edges_ue, m - 1)):
            if degree == 0:
                assert edges.shape[0] == 0
                continue
            out_deg = np.bincount(edges[:, 0], minlength=m * k)
            in_deg = np.bincount(edges[:, 1], minlength=m * k)
            assert np.all(out_deg == degree)
            assert np.all(in_deg == degree)
            pairs = edge_set(edges)
            assert all((j, i) in pairs for i, j in pairs)
            assert all(i != j for i, j in pairs)

    def test_deterministic_lexicographic_order(self):
        graph = build_graph(3, 4)
        for edges in (graph.edges_ap, graph.edges_ue):
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            assert np.array_equal(order, np.arange(edges.shape[0]))

    def test_node_index_row_major(self):
        assert node_index(2, 3, num_ues=5) == 13


class TestInputFeatures:
    def test_log_magnitude(self):
        log_mag, _ = log_mag_phase(np.array([[2.0 ** -30]], dtype=complex))
        assert log_mag[0, 0] == pytest.approx(-30.0)

    def test_phase_convention(self):
        _, phase = log_mag_phase(np.array([[1.0, -1.0, -1j]], dtype=complex))
        np.testing.assert_allclose(phase, [[0.0, np.pi, 1.5 * np.pi]])

    def test_clamped_entries(self):
        log_mag, phase = log_mag_phase(np.array([[0.0]], dtype=complex))
        assert log_mag[0, 0] == pytest.approx(np.log2(TOL.mag_clamp))
        assert phase[0, 0] == 0.0

    def test_feature_layout(self, rng):
        ch = make_channel(rng, 3, 2)
        feats = input_features_raw(ch)
        assert feats.shape == (6, 4)
        i = node_index(1, 1, 2)
        lm_g, ph_g = log_mag_phase(ch.entries)
        lm_p, ph_p = log_mag_phase(ch.pinv)
        np.testing.assert_allclose(feats[i], [lm_g[1, 1], ph_g[1, 1], lm_p[1, 1], ph_p[1, 1]])

    def test_standardization_yields_unit_stats(self, rng):
        rows = []
        channels = [make_channel(rng, 6, 3) for _ in range(20)]
        for ch in channels:
            rows.append(input_features_raw(ch))
        pooled = np.concatenate(rows)
        stats = FeatureStats(pooled.mean(0), pooled.std(0), np.zeros(6), np.ones(6))
        standardized = np.concatenate([input_features(ch, stats) for ch in channels])
        assert np.abs(standardized.mean(0)).max() <= 1e-9
        np.testing.assert_allclose(standardized.std(0), 1.0, atol=1e-9)


class TestTargetFeatures:
    def test_roundtrip_reconstructs_precoder(self, rng):
        ch = make_channel(rng, 6, 3, scale=1e-4)
        delta = Precoder(
            0.5 * (rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3)))
        )
        raw = target_features_raw(ch, delta)
        stats = FeatureStats.identity()
        y1, y2, y3 = deprocess_features(raw, stats, 6, 3)
        rebuilt = y1 + y2 + y3
        mask = np.abs(delta.entries) > TOL.mag_clamp * 10
        rel = np.abs(rebuilt - delta.entries)[mask] / np.abs(delta.entries)[mask]
        assert rel.max() <= 1e-9

    def test_no_null_component_hits_clamp_floor(self, rng):
        # identity channel: the null space is empty and the decomposition is
        # exact in floating point, so the third component is exactly zero
        ch = ChannelMatrix(np.eye(3))
        delta = Precoder(0.4 * rng.standard_normal((3, 3)) + 0.1j * rng.standard_normal((3, 3)))
        raw = target_features_raw(ch, delta)
        np.testing.assert_allclose(raw[:, 4], np.log2(TOL.mag_clamp), atol=1e-12)
        np.testing.assert_allclose(raw[:, 5], 0.0, atol=1e-12)

    def test_phases_invariant_to_positive_scaling(self, rng):
        ch = make_channel(rng, 6, 3, scale=1e-4)
        delta = Precoder(rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3)))
        half = Precoder(0.5 * delta.entries)
        a = target_features_raw(ch, delta)
        b = target_features_raw(ch, half)
        np.testing.assert_allclose(a[:, [1, 3, 5]], b[:, [1, 3, 5]], atol=1e-9)

    def test_standardized_targets(self, rng):
        ch = make_channel(rng, 4, 2, scale=1e-4)
        delta = Precoder(0.1 * rng.standard_normal((4, 2)))
        raw = target_features_raw(ch, delta)
        stats = FeatureStats(
            np.zeros(4), np.ones(4), raw.mean(0), np.maximum(raw.std(0), 1e-6)
        )
        standardized = target_features(ch, delta, stats)
        np.testing.assert_allclose(
            standardized, (raw - stats.output_mean) / stats.output_std
        )


class TestPostprocess:
    def test_algebraic_identities_random_output(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-4)
        stats = FeatureStats.identity()
        raw = rng.standard_normal((24, 6)) * 2.0 - 10.0
        delta = deprocess_and_postprocess(ch, raw, stats)
        assert np.all(delta.row_norms() <= 1 + TOL.row_norm_slack)

        # rebuild unprojected components to check the enforced identities
        y1, y2, y3 = deprocess_features(raw, stats, 8, 3)
        gt = ch.entries.T
        y1p = ch.pinv * np.real(np.diag(gt @ y1))[None, :]
        b = gt @ y2
        y2p = ch.pinv @ (b - np.diag(np.diag(b)))
        a = effective_channel(ch, Precoder(y1p + y2p + y3)).entries
        scale = np.abs(a).max()
        d1 = gt @ y1p
        assert np.abs(np.diag(d1).imag).max() <= TOL.postprocess_rel * scale
        assert np.abs(d1 - np.diag(np.diag(d1))).max() <= TOL.postprocess_rel * scale
        assert np.abs(np.diag(gt @ y2p)).max() <= TOL.postprocess_rel * scale

    def test_exact_target_recovers_solver_performance(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-4)
        rho = 1e8
        result = solve_olp(ch, rho, SolverConfig())
        raw = target_features_raw(ch, result.precoder)
        delta = deprocess_and_postprocess(ch, raw, FeatureStats.identity())
        assert min_sinr(ch, delta, rho) >= result.t_star * (1 - 0.01) - 1e-9


class TestPermuteGraph:
    def test_identity(self, rng):
        graph = build_graph(3, 2).with_features(rng.standard_normal((6, 4)))
        same = permute_graph(graph, np.arange(3), np.arange(2))
        assert np.array_equal(same.edges_ap, graph.edges_ap)
        assert np.array_equal(same.edges_ue, graph.edges_ue)
        assert np.array_equal(same.node_features, graph.node_features)

    def test_topology_invariant_under_relabeling(self, rng):
        graph = build_graph(4, 3)
        permuted = permute_graph(graph, rng.permutation(4), rng.permutation(3))
        assert np.array_equal(permuted.edges_ap, graph.edges_ap)
        assert np.array_equal(permuted.edges_ue, graph.edges_ue)

    def test_features_follow_nodes(self, rng):
        m, k = 4, 3
        features = rng.standard_normal((m * k, 5))
        graph = build_graph(m, k).with_features(features)
        row = rng.permutation(m)
        col = rng.permutation(k)
        permuted = permute_graph(graph, row, col)
        for i in range(m):
            for j in range(k):
                np.testing.assert_array_equal(
                    permuted.node_features[node_index(row[i], col[j], k)],
                    features[node_index(i, j, k)],
                )

    def test_rejects_non_permutations(self):
        graph = build_graph(2, 2)
        with pytest.raises(ValueError):
            permute_graph(graph, [0, 0], [0, 1])


class TestFeatureStats:
    def test_requires_positive_std(self):
        with pytest.raises(ValueError):
            FeatureStats(np.zeros(4), np.zeros(4), np.zeros(6), np.ones(6))

    def test_from_features(self, rng):
        fin = rng.standard_normal((100, 4))
        fout = rng.standard_normal((100, 6))
        stats = FeatureStats.from_features(fin, fout)
        np.testing.assert_allclose(stats.input_mean, fin.mean(0))
        np.testing.assert_allclose(stats.output_std, fout.std(0))


class TestLogPhaseInverse:
    def test_mutual_inverse_above_clamp(self, rng):
        values = (rng.standard_normal((50, 7)) + 1j * rng.standard_normal((50, 7))) * np.exp(
            rng.uniform(-30, 5, size=(50, 7))
        )
        log_mag, phase = log_mag_phase(values)
        rebuilt = np.exp2(log_mag) * np.exp(1j * phase)
        rel = np.abs(rebuilt - values) / np.abs(values)
        assert rel.max() <= 1e-12


class TestAdversarialRawOutput:
    def test_huge_log_magnitudes_still_feasible(self, rng):
        ch = make_channel(rng, 4, 2, scale=1e-4)
        raw = rng.standard_normal((8, 6))
        raw[:, 0::2] = 800.0  # would overflow squared row norms without the ceiling
        delta = deprocess_and_postprocess(ch, raw, FeatureStats.identity())
        assert np.all(np.isfinite(delta.entries))
        assert np.all(delta.row_norms() <= 1 + 1e-12)
