import numpy as np
import pytest

import nmk
from nmk import (
    ChannelMap,
    DensityState,
    PureState,
    apply_channel,
    fidelity,
    layout,
    partial_trace,
    purify,
    sample,
    tensor,
    trace_distance,
)
from nmk.errors import (
    BadDims,
    BudgetExceeded,
    DimensionMismatch,
    DuplicateLabel,
    InvariantViolation,
    LayoutMismatch,
    UnknownLabel,
)
from nmk.registers import Register

from conftest import bell_pair, classical_corr, eve_zero, ghz_diag


def basis_state(dim, i, label="A", party="alice"):
    m = np.zeros((dim, dim), dtype=complex)
    m[i, i] = 1.0
    return DensityState(layout((label, dim, party)), m)


def mixed_qubit(label="A", party="alice"):
    return DensityState(layout((label, 2, party)), np.eye(2, dtype=complex) / 2)


class TestTensor:
    def test_basis_product(self):
        out = tensor(basis_state(2, 0, "A"), basis_state(2, 0, "B", "bob"))
        expected = np.zeros((4, 4), dtype=complex)
        expected[0, 0] = 1.0
        np.testing.assert_allclose(out.matrix, expected)

    def test_maximally_mixed(self):
        out = tensor(mixed_qubit("A"), mixed_qubit("B", "bob"))
        np.testing.assert_allclose(out.matrix, np.eye(4) / 4)
        assert abs(nmk.entropy(out, ("A", "B")) - 2.0) < 1e-12

    def test_bell_with_eve(self):
        out = tensor(bell_pair(), eve_zero())
        assert abs(nmk.nonmarkovianity(out) - 1.0) < 1e-9

    def test_duplicate_label_rejected(self):
        with pytest.raises(DuplicateLabel):
            tensor(mixed_qubit("A"), mixed_qubit("A", "bob"))


class TestPartialTrace:
    def test_bell_marginal(self):
        out = partial_trace(bell_pair(), ("A",))
        np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-12)

    def test_ghz_drop_eve(self):
        # Direct matrix computation: sum the two E diagonal blocks.
        g = ghz_diag()
        expected = np.zeros((4, 4), dtype=complex)
        full = g.matrix.reshape(4, 2, 4, 2)
        for e in range(2):
            expected += full[:, e, :, e]
        out = partial_trace(g, ("A", "B"))
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)
        np.testing.assert_allclose(out.matrix, classical_corr().matrix, atol=1e-12)

    def test_product_factor_recovery(self):
        rho = sample("density_hs", (2,), 3, layout=layout(("A", 2, "alice")))
        sig = sample("density_hs", (3,), 4, layout=layout(("B", 3, "bob")))
        out = partial_trace(tensor(rho, sig), ("B",))
        np.testing.assert_allclose(out.matrix, sig.matrix, atol=1e-12)

    def test_trace_preserved(self):
        rho = sample("density_hs", (2, 2, 2), 11)
        out = partial_trace(rho, ("A", "E"))
        assert abs(np.trace(out.matrix) - 1.0) < 1e-12

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            partial_trace(bell_pair(), ("Z",))

    def test_tensor_then_trace_roundtrip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = sample("density_hs", (2, 2), rng, layout=layout(("A", 2, "alice"), ("X", 2, "eve")))
            b = sample("density_hs", (3,), rng, layout=layout(("B", 3, "bob")))
            back = partial_trace(tensor(a, b), ("A", "X"))
            assert np.max(np.abs(back.matrix - a.matrix)) < 1e-12


class TestPurify:
    def test_maximally_mixed(self):
        psi = purify(mixed_qubit(), "R")
        assert psi.layout.register("R").dim == 2
        back = partial_trace(psi.to_density(), ("A",))
        assert trace_distance(back, mixed_qubit()) < 1e-10

    def test_pure_input_trivial_reference(self):
        rho = basis_state(2, 1)
        psi = purify(rho, "R")
        assert psi.layout.register("R").dim == 1

    def test_rank3_qutrit_roundtrip(self):
        rho = sample("density_hs", (3,), 7, layout=layout(("A", 3, "alice")))
        psi = purify(rho, "R")
        assert psi.layout.register("R").dim == 3
        back = partial_trace(psi.to_density(), ("A",))
        assert trace_distance(back, rho) < 1e-10

    def test_roundtrip_many(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            dims = tuple(rng.choice([2, 3], size=2))
            rho = sample(
                "density_hs", dims, rng, layout=layout(("A", int(dims[0]), "alice"), ("B", int(dims[1]), "bob"))
            )
            back = partial_trace(purify(rho, "R").to_density(), ("A", "B"))
            assert trace_distance(back, rho) < 1e-9

    def test_deterministic_and_phase_fixed(self):
        rho = sample("density_hs", (2, 2), 5, layout=layout(("A", 2, "alice"), ("B", 2, "bob")))
        p1 = purify(rho, "R")
        p2 = purify(rho, "R")
        np.testing.assert_array_equal(p1.amplitudes, p2.amplitudes)
        # Column-wise phase convention: first nonzero entry real positive.
        arr = p1.amplitudes.reshape(-1, p1.layout.register("R").dim)
        for col in arr.T:
            nz = col[np.abs(col) > 1e-12]
            assert nz[0].imag == pytest.approx(0.0, abs=1e-12)
            assert nz[0].real > 0

    def test_reference_padding(self):
        psi = purify(mixed_qubit(), "R", ref_dim=4)
        assert psi.layout.register("R").dim == 4
        with pytest.raises(BadDims):
            purify(mixed_qubit(), "R", ref_dim=1)


class TestApplyChannel:
    def test_identity_channel(self):
        rho = sample("density_hs", (2, 2), 9, layout=layout(("A", 2, "alice"), ("B", 2, "bob")))
        out = apply_channel(rho, ChannelMap.unitary(np.eye(2)), ("B",))
        assert out.layout == rho.layout
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-12)

    def test_mixing_on_eve(self):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        chan = ChannelMap.mixing([np.eye(2), sx], [0.5, 0.5])
        out = apply_channel(ghz_diag(), chan, ("E",))
        expected = np.kron(classical_corr().matrix, np.eye(2) / 2)
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)
        assert abs(nmk.nonmarkovianity(out) - 0.5) < 1e-9

    def test_full_dephasing_of_bell(self):
        out = apply_channel(bell_pair(), ChannelMap.dephasing(2), ("A",))
        np.testing.assert_allclose(out.matrix, classical_corr().matrix, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            apply_channel(bell_pair(), ChannelMap.unitary(np.eye(3)), ("A",))

    def test_trace_preserved_and_identity_elsewhere(self):
        rng = np.random.default_rng(4)
        rho = sample("density_hs", (2, 3), rng, layout=layout(("A", 2, "alice"), ("B", 3, "bob")))
        chan = ChannelMap.unitary(nmk.sample("unitary", 2, rng))
        out = apply_channel(rho, chan, ("A",))
        assert abs(np.trace(out.matrix) - 1.0) < 1e-10
        np.testing.assert_allclose(
            partial_trace(out, ("B",)).matrix, partial_trace(rho, ("B",)).matrix, atol=1e-10
        )

    def test_full_output_layout_ordering(self):
        rho = sample("density_hs", (2, 2), 3, layout=layout(("A", 2, "alice"), ("E", 2, "eve")))
        iso = ChannelMap.isometry(nmk.sample("isometry", (2, 4), 5))
        target = layout(("F", 4, "eve"), ("A", 2, "alice"))
        out = apply_channel(rho, iso, ("E",), out=target)
        assert out.layout.labels == ("F", "A")
        # Same action, block form, then explicit permutation.
        block = apply_channel(rho, iso, ("E",), out=(Register("F", 4, "eve"),))
        np.testing.assert_allclose(out.matrix, block.permuted(("F", "A")).matrix, atol=1e-12)

    def test_generic_declared_inverse_verification(self):
        u = nmk.sample("unitary", 3, 8)
        chan = ChannelMap.from_kraus([u], declared_inverse=ChannelMap.from_kraus([u.conj().T]))
        chan.verify_inverse()  # exercises the matrix-unit loop
        wrong = ChannelMap.from_kraus([np.eye(3, dtype=complex)])
        with pytest.raises(InvariantViolation, match="inverse_composition"):
            ChannelMap.from_kraus([u], declared_inverse=wrong)

    def test_declared_inverse_roundtrip(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            rho = sample("density_hs", (2, 2), rng, layout=layout(("A", 2, "alice"), ("E", 2, "eve")))
            iso = nmk.sample("isometry", (2, 6), rng)
            chan = ChannelMap.isometry(iso)
            widened = apply_channel(rho, chan, ("E",), out=(Register("F", 6, "eve"),))
            back = apply_channel(
                widened, chan.declared_inverse, ("F",), out=(Register("E", 2, "eve"),)
            )
            assert trace_distance(back.permuted(("A", "E")), rho) < 1e-9


class TestTraceDistanceAndFidelity:
    def test_self_distance_zero(self):
        rho = sample("density_hs", (2, 2), 1)
        assert trace_distance(rho, rho) == 0.0

    def test_orthogonal_pure(self):
        assert abs(trace_distance(basis_state(2, 0), basis_state(2, 1)) - 1.0) < 1e-12

    def test_pure_vs_mixed(self):
        assert abs(trace_distance(basis_state(2, 0), mixed_qubit()) - 0.5) < 1e-12

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            a, b, c = (sample("density_hs", (2, 2), rng) for _ in range(3))
            dab, dba = trace_distance(a, b), trace_distance(b, a)
            assert abs(dab - dba) < 1e-12
            assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12

    def test_layout_mismatch(self):
        with pytest.raises(LayoutMismatch):
            trace_distance(mixed_qubit("A"), mixed_qubit("B", "bob"))

    def test_fidelity_extremes(self):
        assert abs(fidelity(basis_state(2, 0), basis_state(2, 0)) - 1.0) < 1e-12
        assert fidelity(basis_state(2, 0), basis_state(2, 1)) < 1e-12


class TestSample:
    def test_pure_deterministic(self):
        v1 = sample("pure", (2,), 123)
        v2 = sample("pure", (2,), 123)
        np.testing.assert_array_equal(v1.amplitudes, v2.amplitudes)

    def test_density_valid(self):
        rho = sample("density_hs", (2, 2), 6)
        assert isinstance(rho, DensityState)  # invariants checked in constructor

    def test_isometry_property(self):
        w = sample("isometry", (2, 4), 10)
        np.testing.assert_allclose(w.conj().T @ w, np.eye(2), atol=1e-12)

    def test_bad_dims(self):
        with pytest.raises(BadDims):
            sample("isometry", (4, 2), 0)
        with pytest.raises(BadDims):
            sample("pure", (), 0)


class TestValidation:
    def test_not_hermitian(self):
        m = np.array([[0.5, 0.5], [0.0, 0.5]], dtype=complex)
        with pytest.raises(InvariantViolation, match="hermitian"):
            DensityState(layout(("A", 2, "alice")), m)

    def test_bad_trace(self):
        with pytest.raises(InvariantViolation, match="unit_trace"):
            DensityState(layout(("A", 2, "alice")), np.eye(2, dtype=complex))

    def test_not_positive(self):
        m = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(InvariantViolation, match="positive_semidefinite"):
            DensityState(layout(("A", 2, "alice")), m)

    def test_pure_norm(self):
        with pytest.raises(InvariantViolation, match="unit_norm"):
            PureState(layout(("A", 2, "alice")), np.array([1.0, 1.0]))

    def test_kraus_completeness(self):
        with pytest.raises(InvariantViolation, match="kraus_completeness"):
            ChannelMap((np.eye(2) * 0.5,))

    def test_dim_budget(self, monkeypatch):
        monkeypatch.setenv("NMK_DIM_BUDGET", "4")
        with pytest.raises(BudgetExceeded):
            DensityState(layout(("A", 8, "alice")), np.eye(8, dtype=complex) / 8)
        monkeypatch.setenv("NMK_DIM_BUDGET", "8")
        DensityState(layout(("A", 8, "alice")), np.eye(8, dtype=complex) / 8)
