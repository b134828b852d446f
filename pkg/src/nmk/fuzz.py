"""Randomized property suites behind the CLI ``fuzz`` subcommand.

Each suite draws seeded random instances, checks an inequality that is a
theorem for exact arithmetic, and reports violations beyond tolerance as
counterexamples carrying the serialized instance.  Every trial owns a
generator derived from ``(seed, trial index)``, so results are identical
for any worker count; ``jobs`` spreads trials over a thread pool.

Suites:

``ssa``            strong subadditivity (CQMI nonnegative) on random states
``monotonicity``   the half-CQMI measure never increases under any free
                   class, and is invariant under Eve's reversible channels
``markov_closure`` random free scripts keep built block states Markov
``witness``        witness-level identities: dual-route objective,
                   tensor additivity, mix linearity, regroup monotonicity,
                   transport invariance, local-channel monotonicity, and
                   the bound for moving a register out of the conditioner
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entropy import cqmi, entropy, nonmarkovianity, party_partition
from .markov import build_markov
from .rand import as_rng, random_isometry, random_unitary, sample
from .registers import Party, Register, RegisterLayout, layout
from .serialize import state_to_json, step_to_json
from .states import ChannelMap, DensityState
from .steps import Scenario, Step, apply_step
from .witness import (
    objective,
    witness_from_isometry,
    witness_local_channel,
    witness_mix,
    witness_regroup,
    witness_relabeled,
    witness_tensor,
    witness_transport_e,
)

SSA_TOL = 1e-9
MONO_TOL = 1e-9
CLOSURE_TOL = 1e-8
IDENTITY_TOL = 1e-9
DUAL_ROUTE_TOL = 1e-8


@dataclass
class FuzzReport:
    suite: str
    trials: int
    passes: int
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "passes": self.passes,
            "failures": self.failures,
            "notes": self.notes,
        }


def _run_trials(worker, count: int, jobs: int):
    """Map trial indices through ``worker``; order-stable and
    worker-count independent (each trial derives its own generator)."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, range(count)))
    else:
        results = [worker(i) for i in range(count)]
    failures = [f for r in results for f in r]
    return failures


# ---------------------------------------------------------------------------
# strong subadditivity


def fuzz_ssa(trials_222: int = 1000, trials_224: int = 200, seed=0, jobs: int = 1) -> FuzzReport:
    total = trials_222 + trials_224

    def worker(i):
        dims = (2, 2, 2) if i < trials_222 else (2, 2, 4)
        rho = sample("density_hs", dims, as_rng([seed, i]))
        value = cqmi(rho, ("A",), ("B",), ("E",))
        if value < -SSA_TOL:
            return [{"dims": list(dims), "cqmi": value, "state": state_to_json(rho)}]
        return []

    failures = _run_trials(worker, total, jobs)
    return FuzzReport("ssa", total, total - len(failures), failures)


# ---------------------------------------------------------------------------
# monotonicity of the half-CQMI measure under the free classes

FREE_CLASS_NAMES = (
    "local_a",
    "local_b",
    "reversible_e",
    "quantum_a_to_e",
    "quantum_b_to_e",
    "broadcast_a",
    "broadcast_b",
    "classical_a_to_e",
    "classical_b_to_e",
    "classical_e_to_a",
    "classical_e_to_b",
)


def _random_channel(dim: int, rng, env: int = 2) -> ChannelMap:
    iso = random_isometry(dim, dim * env, rng)
    kraus = tuple(iso[i * dim : (i + 1) * dim, :] for i in range(env))
    return ChannelMap(kraus)


def _random_measurement(dim: int, rng, outcomes: int = 2):
    iso = random_isometry(dim, dim * outcomes, rng)
    return tuple(iso[i * dim : (i + 1) * dim, :] for i in range(outcomes))


def _mono_scenario(cls: str, rng) -> Scenario:
    if cls in ("quantum_a_to_e", "quantum_b_to_e"):
        party = "alice" if cls == "quantum_a_to_e" else "bob"
        lay = layout(("A", 2, "alice"), ("Q", 2, party), ("B", 2, "bob"), ("E", 2, "eve"))
        return Scenario(sample("density_hs", (2, 2, 2, 2), rng, layout=lay))
    if cls in ("classical_e_to_a", "classical_e_to_b"):
        # Classical message register at Eve: a block-diagonal mixture.
        lay = layout(("A", 2, "alice"), ("B", 2, "bob"), ("E", 2, "eve"))
        weights = rng.dirichlet(np.ones(2))
        blocks = [sample("density_hs", (2, 2, 2), rng, layout=lay) for _ in range(2)]
        msg = RegisterLayout((Register("ME", 2, Party.EVE),))
        mat = sum(
            w * np.kron(b.matrix, np.diag(np.eye(2)[m]).astype(complex))
            for m, (w, b) in enumerate(zip(weights, blocks))
        )
        return Scenario(DensityState(lay.extended(msg.registers), mat))
    return Scenario(sample("density_hs", (2, 2, 2), rng))


def _mono_step(cls: str, rng) -> Step:
    if cls == "local_a":
        return Step.local_a(_random_channel(2, rng), ("A",))
    if cls == "local_b":
        return Step.local_b(_random_channel(2, rng), ("B",))
    if cls == "reversible_e":
        if rng.integers(2) == 0:
            return Step.reversible_e(ChannelMap.unitary(random_unitary(2, rng)), ("E",))
        iso = ChannelMap.isometry(random_isometry(2, 4, rng))
        return Step.reversible_e(iso, ("E",), out=(Register("Ex", 4, Party.EVE),))
    if cls == "quantum_a_to_e" or cls == "quantum_b_to_e":
        return Step.quantum_to_e("Q")
    if cls == "broadcast_a":
        return Step.broadcast_a(_random_measurement(2, rng), ("A",), "J")
    if cls == "broadcast_b":
        return Step.broadcast_b(_random_measurement(2, rng), ("B",), "J")
    if cls == "classical_a_to_e":
        return Step.classical_a_to_e(_random_measurement(2, rng), ("A",), "J")
    if cls == "classical_b_to_e":
        return Step.classical_b_to_e(_random_measurement(2, rng), ("B",), "J")
    if cls == "classical_e_to_a":
        return Step.classical_e_to_a("ME")
    if cls == "classical_e_to_b":
        return Step.classical_e_to_b("ME")
    raise ValueError(cls)


def fuzz_monotonicity(
    trials_per_class: int = 300, seed=0, classes=FREE_CLASS_NAMES, jobs: int = 1
) -> FuzzReport:
    classes = tuple(classes)
    total = trials_per_class * len(classes)

    def worker(i):
        cls = classes[i // trials_per_class]
        rng = as_rng([seed, i])
        sc = _mono_scenario(cls, rng)
        step = _mono_step(cls, rng)
        before = nonmarkovianity(sc.state)
        after = nonmarkovianity(apply_step(sc, step).state)
        bad = after > before + MONO_TOL
        if cls == "reversible_e":
            bad = abs(after - before) > MONO_TOL
        if bad:
            return [
                {
                    "class": cls,
                    "before": before,
                    "after": after,
                    "state": state_to_json(sc.state),
                    "step": step_to_json(step),
                }
            ]
        return []

    failures = _run_trials(worker, total, jobs)
    return FuzzReport("monotonicity", total, total - len(failures), failures)


# ---------------------------------------------------------------------------
# free scripts keep block states Markov

OMEGA_SCRIPT_CLASSES = (
    "local_a",
    "local_b",
    "reversible_e",
    "broadcast_a",
    "broadcast_b",
    "classical_a_to_e",
    "classical_b_to_e",
)


def _random_components(rng, entries=2):
    from .markov import MarkovComponents, MarkovEntry

    probs = rng.dirichlet(np.ones(entries))
    sig_lay = layout(("A", 2, "alice"), ("EL", 2, "eve"))
    tau_lay = layout(("B", 2, "bob"), ("ER", 2, "eve"))
    ents = tuple(
        MarkovEntry(
            float(probs[j]),
            sample("density_hs", (2, 2), rng, layout=sig_lay),
            sample("density_hs", (2, 2), rng, layout=tau_lay),
        )
        for j in range(entries)
    )
    return MarkovComponents(ents)


def _random_omega_step(sc: Scenario, rng, msg_counter: int) -> Step:
    lay = sc.state.layout
    choices = list(OMEGA_SCRIPT_CLASSES)
    # Registers appended by broadcasts blow the dimension up by outcome
    # count per receiving party; keep the final CQMI cheap.
    if sc.state.dim > 64:
        choices = ["local_a", "local_b", "reversible_e"]
    cls = choices[int(rng.integers(len(choices)))]
    label = f"J{msg_counter}"
    if cls == "local_a":
        lbl = lay.party_labels(Party.ALICE)[0]
        return Step.local_a(_random_channel(lay.register(lbl).dim, rng), (lbl,))
    if cls == "local_b":
        lbl = lay.party_labels(Party.BOB)[0]
        return Step.local_b(_random_channel(lay.register(lbl).dim, rng), (lbl,))
    if cls == "reversible_e":
        lbl = lay.party_labels(Party.EVE)[0]
        return Step.reversible_e(
            ChannelMap.unitary(random_unitary(lay.register(lbl).dim, rng)), (lbl,)
        )
    if cls == "broadcast_a":
        lbl = lay.party_labels(Party.ALICE)[0]
        return Step.broadcast_a(_random_measurement(lay.register(lbl).dim, rng), (lbl,), label)
    if cls == "broadcast_b":
        lbl = lay.party_labels(Party.BOB)[0]
        return Step.broadcast_b(_random_measurement(lay.register(lbl).dim, rng), (lbl,), label)
    if cls == "classical_a_to_e":
        lbl = lay.party_labels(Party.ALICE)[0]
        return Step.classical_a_to_e(
            _random_measurement(lay.register(lbl).dim, rng), (lbl,), label
        )
    lbl = lay.party_labels(Party.BOB)[0]
    return Step.classical_b_to_e(_random_measurement(lay.register(lbl).dim, rng), (lbl,), label)


def fuzz_markov_closure(
    trials: int = 200, seed=0, script_length: int = 3, jobs: int = 1
) -> FuzzReport:
    def worker(t):
        rng = as_rng([seed, t])
        components = _random_components(rng)
        sc = Scenario(build_markov(components))
        steps = []
        current = sc
        for i in range(script_length):
            step = _random_omega_step(current, rng, i)
            steps.append(step)
            current = apply_step(current, step)
        a, b, e = party_partition(current.state)
        value = cqmi(current.state, a, b, e)
        if value > CLOSURE_TOL:
            return [
                {
                    "trial": t,
                    "cqmi": value,
                    "steps": [step_to_json(s) for s in steps],
                    "state": state_to_json(sc.state),
                }
            ]
        return []

    failures = _run_trials(worker, trials, jobs)
    return FuzzReport("markov_closure", trials, trials - len(failures), failures)


# ---------------------------------------------------------------------------
# witness identities


def _random_witness(rng, dims=(2, 2, 2), rank=3, ext=(1, 1, 1), k=None, lay=None):
    rho = sample("density_hs", dims, rng, rank=rank, layout=lay)
    k = k if k is not None else rank
    cap = ext[0] * ext[1] * ext[2] * k
    w_mat = random_isometry(rank, cap, rng)
    return rho, witness_from_isometry(rho, w_mat, ext, k)


def _route2_objective(w) -> float:
    """Member-marginal recomputation of the objective (the identity the
    dual-route check exercises)."""
    g = w.groups
    t = w.target()
    e = tuple(lbl for lbl in t.layout.labels if lbl in set(g.e))
    s_ab_e = entropy(t) - (entropy(t, e) if e else 0.0)
    total = 0.0
    for i, p in enumerate(w.weights):
        total += p * (
            _member_entropy(w, i, g.a + g.a_prime)
            + _member_entropy(w, i, g.b + g.b_prime)
            - _member_entropy(w, i, g.a_prime + g.b_prime)
        )
    return 0.5 * (s_ab_e + total)


def _member_entropy(w, i, labels) -> float:
    from .entropy import entropy_of_matrix

    if not labels:
        return 0.0
    return entropy_of_matrix(w._member_reduced(i, labels))


CHECKS_PER_TRIAL = 7


def _witness_trial(seed, t):
    rng = as_rng([seed, t])
    failures = []
    rho, w = _random_witness(rng, ext=(2, 2, 1), k=3)
    obj = objective(w)

    def fail(kind, **payload):
        failures.append({"trial": t, "check": kind, **payload})

    if abs(obj - _route2_objective(w)) > DUAL_ROUTE_TOL:
        fail("dual_route", objective=obj, recomputed=_route2_objective(w))
    lower = nonmarkovianity(rho)
    if obj < lower - IDENTITY_TOL:
        fail("lower_sandwich", objective=obj, lower=lower)
    other_lay = layout(("A2", 2, "alice"), ("B2", 2, "bob"), ("E2", 2, "eve"))
    _, w2 = _random_witness(rng, lay=other_lay)
    w2 = witness_relabeled(w2, "x")
    pair = witness_tensor(w, w2)
    if abs(objective(pair) - obj - objective(w2)) > IDENTITY_TOL:
        fail("tensor_additivity", pair=objective(pair), parts=obj + objective(w2))
    mixed = witness_mix([(0.25, w), (0.75, w)])
    if abs(objective(mixed) - obj) > IDENTITY_TOL:
        fail("mix_linearity", mixed=objective(mixed), part=obj)
    regrouped = witness_regroup(w, w.groups.a[0], to="e")
    if objective(regrouped) > obj + IDENTITY_TOL:
        fail("regroup_monotone", regrouped=objective(regrouped), objective=obj)
    iso = random_isometry(2, 4, rng)
    moved = witness_transport_e(w, iso, (w.groups.e[0],), (Register("F", 4, Party.EVE),))
    if abs(objective(moved) - obj) > IDENTITY_TOL:
        fail("transport_invariance", transported=objective(moved), objective=obj)
    chan = _random_channel(2, rng)
    local = witness_local_channel(w, "b", chan.kraus, (w.groups.b[0],), "Benv")
    if objective(local) > obj + IDENTITY_TOL:
        fail("local_channel_monotone", transported=objective(local), objective=obj)
    return failures


def fuzz_witness(trials: int = 100, seed=0, mixture_probes: int = 0, jobs: int = 1) -> FuzzReport:
    notes = {
        "mixture_probes": [],
        "transport_coverage": "explicit mappings only (local channels, reversible "
        "isometries, regrouping); broadcast/classical transports have no explicit "
        "witness mapping and are not checked",
    }
    failures = _run_trials(lambda t: _witness_trial(seed, t), trials, jobs)
    # Informational only: does the optimized bracket of a flagged mixture
    # track the weighted part brackets?  Recorded, never failed.
    if mixture_probes:
        from .nmf import EstimateConfig, estimate

        rng = as_rng([seed, trials])
        cfg = EstimateConfig(restarts=4, max_iters=200, seed=int(rng.integers(2**31)))
        for _ in range(mixture_probes):
            r = float(rng.uniform(0.2, 0.8))
            parts = [sample("density_hs", (2, 2, 2), rng, rank=2) for _ in range(2)]
            part_ests = [estimate(p, cfg) for p in parts]
            mat = r * np.kron(parts[0].matrix, np.diag([1.0, 0.0])) + (1 - r) * np.kron(
                parts[1].matrix, np.diag([0.0, 1.0])
            )
            lay = parts[0].layout.extended((Register("M", 2, Party.EVE),))
            mixture = DensityState(lay, mat)
            mix_est = estimate(mixture, cfg)
            weighted = r * part_ests[0].upper_bits + (1 - r) * part_ests[1].upper_bits
            notes["mixture_probes"].append(
                {
                    "weight": r,
                    "mixture_upper": mix_est.upper_bits,
                    "weighted_part_upper": weighted,
                    "difference": mix_est.upper_bits - weighted,
                }
            )
    total = trials * CHECKS_PER_TRIAL
    return FuzzReport("witness", total, total - len(failures), failures, notes)


SUITES = {
    "ssa": lambda trials, seed, jobs=1: fuzz_ssa(trials, max(trials // 5, 1), seed, jobs),
    "monotonicity": lambda trials, seed, jobs=1: fuzz_monotonicity(trials, seed, jobs=jobs),
    "markov_closure": lambda trials, seed, jobs=1: fuzz_markov_closure(trials, seed, jobs=jobs),
    "witness": lambda trials, seed, jobs=1: fuzz_witness(trials, seed, mixture_probes=2, jobs=jobs),
}
