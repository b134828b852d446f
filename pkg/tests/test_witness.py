import math

import numpy as np
import pytest

from nmk import (
    DensityState,
    MarkovComponents,
    MarkovEntry,
    Witness,
    WitnessGroups,
    baseline_witnesses,
    build_markov,
    check_witness,
    continuity_bound,
    entropy,
    layout,
    markov_witness,
    mutual_info,
    nonmarkovianity,
    objective,
    sample,
    tensor,
    witness_from_isometry,
    witness_local_channel,
    witness_mix,
    witness_regroup,
    witness_relabeled,
    witness_tensor,
    witness_transport_e,
)
from nmk.errors import BadRange, DimensionTooSmall, InvariantViolation, LayoutClash
from nmk.rand import random_isometry
from nmk.registers import Party, Register

from conftest import eve_zero
from test_markov import random_components


def recompute_objective(w):
    """Independent oracle: the member-marginal identity
    1/2 [S(AB|E) + sum_k p_k (S(AA') + S(BB') - S(A'B'))], evaluated with
    plain entropy calls on dense member states."""
    g = w.groups
    t = w.target()
    e = tuple(lbl for lbl in t.layout.labels if lbl in set(g.e))
    s_ab_e = entropy(t, t.layout.labels) - (entropy(t, e) if e else 0.0)
    total = 0.0
    for i, p in enumerate(w.weights):
        member = w.member_pure(i).to_density()
        term = entropy(member, g.a + g.a_prime) + entropy(member, g.b + g.b_prime)
        if g.a_prime + g.b_prime:
            term -= entropy(member, g.a_prime + g.b_prime)
        total += p * term
    return 0.5 * (s_ab_e + total)


def random_witness(seed, ext=(1, 1, 1), k=None, rank=3):
    rng = np.random.default_rng(seed)
    rho = sample("density_hs", (2, 2, 2), rng, rank=rank)
    k = k or rank
    w_mat = random_isometry(rank, ext[0] * ext[1] * ext[2] * k, rng)
    return rho, witness_from_isometry(rho, w_mat, ext, k)


class TestConstruction:
    def test_pure_state_trivial_witness(self):
        rho = sample("pure", (2, 2, 2), 1).to_density()
        w = witness_from_isometry(rho, np.eye(1, dtype=complex), (1, 1, 1), 1)
        assert w.k == 1
        assert abs(objective(w) - 0.5 * mutual_info(rho, ("A",), ("B",))) < 1e-10

    def test_identity_steering_of_product_mixture(self):
        # I/2 (x) I/2 (x) |0><0| steered by the identity into the flag
        # gives the four basis products with equal weight.
        mixed = DensityState(
            layout(("A", 2, "alice"), ("B", 2, "bob")), np.eye(4, dtype=complex) / 4
        )
        rho = tensor(mixed, eve_zero())
        w = witness_from_isometry(rho, np.eye(4, dtype=complex), (1, 1, 1), 4)
        assert w.k == 4
        assert np.allclose(w.weights, [0.25] * 4)
        for i in range(4):
            member = w.member_pure(i).to_density()
            assert abs(mutual_info(member, ("A",), ("B",))) < 1e-10
        # Product members with trivial primes leave the full conditional
        # entropy on the table: the objective is S(AB|E)/2 = 1, not 0.
        assert objective(w) == pytest.approx(1.0, abs=1e-10)

    def test_random_reduction_constraint(self):
        rho, w = random_witness(2, ext=(2, 1, 2), k=4)
        assert check_witness(w, rho, tol=1e-10) < 1e-10

    def test_capacity_too_small(self):
        rho = sample("density_hs", (2, 2, 2), 3)  # rank 8
        with pytest.raises(DimensionTooSmall):
            witness_from_isometry(rho, np.eye(4, dtype=complex), (1, 1, 1), 4)

    def test_realized_state_has_classical_flag(self):
        _, w = random_witness(4)
        joint = w.realized()
        assert joint.layout.register("K").dim == w.k
        # Off-diagonal flag blocks vanish by construction.
        t = joint.matrix.reshape(w.layout.dim, w.k, w.layout.dim, w.k)
        for i in range(w.k):
            for j in range(w.k):
                if i != j:
                    assert np.max(np.abs(t[:, i, :, j])) == 0.0


class TestObjective:
    def test_dual_route_identity(self):
        for seed in range(20):
            _, w = random_witness(seed, ext=(2, 2, 1), k=3)
            assert abs(objective(w) - recompute_objective(w)) < 1e-8

    def test_dual_route_identity_with_purifier_extension(self):
        # The escalation round uses a nontrivial E'.
        for seed in range(10):
            _, w = random_witness(seed, ext=(2, 2, 2), k=3)
            assert abs(objective(w) - recompute_objective(w)) < 1e-8

    def test_markov_witness_vanishes(self):
        for seed in range(5):
            mc = random_components(seed)
            w = markov_witness(mc)
            check_witness(w, build_markov(mc), tol=1e-9)
            assert abs(objective(w)) < 1e-9

    def test_single_product_entry(self):
        from test_markov import basis_qubit

        mc = MarkovComponents(
            (MarkovEntry(1.0, basis_qubit(0, "A", "alice"), basis_qubit(0, "B", "bob")),)
        )
        assert abs(objective(markov_witness(mc))) < 1e-12

    def test_objective_at_least_lower_bound(self):
        for seed in range(10):
            rho, w = random_witness(seed)
            assert objective(w) >= nonmarkovianity(rho) - 1e-9


class TestBaselines:
    def test_pure_state_value(self):
        rho = sample("pure", (2, 2, 2), 5).to_density()
        values = [objective(w) for w in baseline_witnesses(rho)]
        target = 0.5 * mutual_info(rho, ("A",), ("B",))
        assert min(values) == pytest.approx(target, abs=1e-9)

    def test_bell_value(self, bell_e0):
        values = [objective(w) for w in baseline_witnesses(bell_e0)]
        assert min(values) == pytest.approx(1.0, abs=1e-9)

    def test_upper_bound_guarantee(self):
        for seed in range(10):
            rho = sample("density_hs", (2, 2, 2), seed)
            cap = min(entropy(rho, ("A",)), entropy(rho, ("B",)))
            assert min(objective(w) for w in baseline_witnesses(rho)) <= cap + 1e-9

    def test_classical_corr_gap_to_optimal(self, classical_corr_e0):
        baseline = min(objective(w) for w in baseline_witnesses(classical_corr_e0))
        assert baseline == pytest.approx(1.0, abs=1e-9)
        # The two-member basis ensemble achieves the true value 1/2.
        lay = classical_corr_e0.layout
        members = []
        for i in (0, 1):
            vec = np.zeros(8, dtype=complex)
            vec[i * 4 + i * 2] = 1.0  # |ii> (x) |0>_E
            members.append(vec)
        groups = WitnessGroups(("A",), (), ("B",), (), ("E",), ())
        manual = Witness(lay, groups, (0.5, 0.5), tuple(members))
        check_witness(manual, classical_corr_e0, tol=1e-12)
        assert objective(manual) == pytest.approx(0.5, abs=1e-10)


class TestTransforms:
    def test_tensor_additivity(self):
        _, w1 = random_witness(7)
        _, w2 = random_witness(8, ext=(2, 1, 1), k=3)
        w2 = witness_relabeled(w2, "2")
        pair = witness_tensor(w1, w2)
        assert abs(objective(pair) - objective(w1) - objective(w2)) < 1e-9

    def test_tensor_markov_pair_vanishes(self):
        # Trivial memory registers keep the prime dimensions (and hence the
        # joint reductions) small.
        w1 = markov_witness(random_components(1, entries=2, d_el=1, d_er=1))
        w2 = witness_relabeled(markov_witness(random_components(2, entries=2, d_el=1, d_er=1)), "2")
        assert abs(objective(witness_tensor(w1, w2))) < 1e-9

    def test_tensor_label_clash(self):
        _, w1 = random_witness(7)
        with pytest.raises(LayoutClash):
            witness_tensor(w1, w1)

    def test_mix_single_part_unchanged(self):
        _, w = random_witness(9)
        assert abs(objective(witness_mix([(1.0, w)])) - objective(w)) < 1e-9

    def test_mix_of_block_state_witnesses_vanishes(self):
        w = markov_witness(random_components(4, entries=2))
        mixed = witness_mix([(0.3, w), (0.7, w)])
        assert abs(objective(mixed)) < 1e-9

    def test_mix_linearity_of_pure_parts(self):
        p1 = sample("pure", (2, 2, 2), 10).to_density()
        p2 = sample("pure", (2, 2, 2), 11).to_density()
        w1 = baseline_witnesses(p1)[0]
        w2 = baseline_witnesses(p2)[0]
        # Parts must share one member layout: pad both to the same shape.
        mixed = witness_mix([(0.5, w1), (0.5, Witness(w1.layout, w1.groups, w2.weights, w2.members))])
        expected = 0.5 * objective(w1) + 0.5 * objective(w2)
        assert abs(objective(mixed) - expected) < 1e-9

    def test_regroup_trivial_register_keeps_value(self):
        rho, w = random_witness(12)
        # Move a dim-1 padding register: add one to the A group first.
        lay = w.layout.extended((Register("C", 1, Party.ALICE),))
        grown = Witness(
            lay,
            WitnessGroups(w.groups.a + ("C",), w.groups.a_prime, w.groups.b,
                          w.groups.b_prime, w.groups.e, w.groups.e_prime),
            w.weights,
            w.members,
        )
        moved = witness_regroup(grown, "C", to="e")
        assert abs(objective(moved) - objective(grown)) < 1e-12

    def test_regroup_monotone(self):
        lay = layout(("A", 2, "alice"), ("C", 2, "alice"), ("B", 2, "bob"), ("E", 2, "eve"))
        rng = np.random.default_rng(13)
        for _ in range(10):
            rho = sample("density_hs", (2, 2, 2, 2), rng, rank=4, layout=lay)
            w_mat = random_isometry(4, 4, rng)
            w = witness_from_isometry(rho, w_mat, (1, 1, 1), 4)
            moved = witness_regroup(w, "C", to="e")
            assert objective(moved) <= objective(w) + 1e-9

    def test_regroup_classical_copy_of_flag_drops(self):
        # Members |k>_A |k>_C |k>_B |0>_E: the A-side copy of the flag costs
        # half a bit until it is regrouped into the conditioner.
        lay = layout(("A", 2, "alice"), ("C", 2, "alice"), ("B", 2, "bob"), ("E", 1, "eve"))
        members = []
        for k in (0, 1):
            vec = np.zeros(8, dtype=complex)
            vec[k * 4 + k * 2 + k] = 1.0
            members.append(vec)
        w = Witness(lay, WitnessGroups(("A", "C"), (), ("B",), (), ("E",), ()), (0.5, 0.5), tuple(members))
        moved = witness_regroup(w, "C", to="e")
        assert objective(w) == pytest.approx(0.5, abs=1e-10)
        assert objective(moved) == pytest.approx(0.0, abs=1e-10)

    def test_move_out_of_conditioner_bounded(self):
        lay = layout(("A", 2, "alice"), ("B", 2, "bob"), ("E", 2, "eve"), ("Q", 2, "eve"))
        rng = np.random.default_rng(14)
        for _ in range(10):
            rho = sample("density_hs", (2, 2, 2, 2), rng, rank=4, layout=lay)
            w = witness_from_isometry(rho, random_isometry(4, 4, rng), (1, 1, 1), 4)
            moved = witness_regroup(w, "Q", to="a")
            assert objective(moved) <= objective(w) + math.log2(2) + 1e-9

    def test_transport_e_invariance(self):
        rng = np.random.default_rng(15)
        for seed in range(5):
            _, w = random_witness(seed, ext=(2, 1, 1), k=3)
            iso = random_isometry(2, 6, rng)
            moved = witness_transport_e(w, iso, ("E",), (Register("F", 6, Party.EVE),))
            assert abs(objective(moved) - objective(w)) < 1e-9

    def test_local_channel_monotone(self):
        rng = np.random.default_rng(16)
        for seed in range(5):
            _, w = random_witness(seed)
            iso = random_isometry(2, 4, rng)
            kraus = [iso[i * 2 : (i + 1) * 2, :] for i in range(2)]
            for side, reg in (("a", "A"), ("b", "B")):
                moved = witness_local_channel(w, side, kraus, (reg,), f"{reg}env")
                assert objective(moved) <= objective(w) + 1e-9


class TestContinuityBound:
    def test_zero(self):
        assert continuity_bound(0.0, 2, 2) == 0.0

    def test_full_distance(self):
        # 4*log2(4) + 6*h(1/2) = 8 + 6.
        assert continuity_bound(1.0, 2, 2) == pytest.approx(14.0, abs=1e-12)

    def test_small_eps_plugin(self):
        # Oracle arithmetic: 0.8 + 3.3*h(1/11).
        h = -(1 / 11) * math.log2(1 / 11) - (10 / 11) * math.log2(10 / 11)
        expected = 0.8 + 3.3 * h
        assert expected == pytest.approx(2.250340, abs=1e-6)
        assert continuity_bound(0.01, 2, 2) == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_eps(self):
        values = [continuity_bound(e, 2, 3) for e in np.linspace(0, 1, 21)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_bad_range(self):
        with pytest.raises(BadRange):
            continuity_bound(1.5, 2, 2)
        with pytest.raises(BadRange):
            continuity_bound(-0.1, 2, 2)


def test_weights_validated():
    lay = layout(("A", 2, "alice"), ("B", 2, "bob"), ("E", 1, "eve"))
    vec = np.zeros(4, dtype=complex)
    vec[0] = 1.0
    groups = WitnessGroups(("A",), (), ("B",), (), ("E",), ())
    with pytest.raises(InvariantViolation, match="weights"):
        Witness(lay, groups, (0.7,), (vec,))
