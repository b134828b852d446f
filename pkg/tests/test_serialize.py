import json

import numpy as np
import pytest

from nmk import objective, sample
from nmk.errors import BadParams, InvariantViolation
from nmk.serialize import (
    components_from_json,
    components_to_json,
    dumps_canonical,
    script_from_json,
    script_to_json,
    state_from_json,
    state_to_json,
    witness_from_json,
    witness_to_json,
)
from nmk.zoo import zoo as build_zoo

from test_markov import random_components
from test_witness import random_witness


def test_state_roundtrip():
    rho = sample("density_hs", (2, 3), 1)
    back = state_from_json(json.loads(json.dumps(state_to_json(rho))))
    assert back.layout == rho.layout
    np.testing.assert_allclose(back.matrix, rho.matrix, atol=1e-15)


def test_reader_names_violated_invariant():
    rho = sample("density_hs", (2, 2), 2)
    payload = state_to_json(rho)
    payload["matrix"]["re"][0][0] += 0.5
    with pytest.raises(InvariantViolation) as err:
        state_from_json(payload)
    assert "unit_trace" in str(err.value) or "hermitian" in str(err.value)

    payload = state_to_json(rho)
    payload["matrix"]["im"][0][1] += 0.3  # breaks hermiticity
    with pytest.raises(InvariantViolation, match="hermitian"):
        state_from_json(payload)

    with pytest.raises(BadParams):
        state_from_json({"registers": []})


def test_components_roundtrip():
    mc = random_components(3, entries=2)
    back = components_from_json(json.loads(json.dumps(components_to_json(mc))))
    assert back.probs == pytest.approx(mc.probs)
    np.testing.assert_allclose(back.entries[0].sigma.matrix, mc.entries[0].sigma.matrix)


def test_script_roundtrip_with_channels():
    zs = build_zoo("nonfree_script", {"cls": "secret_ab"})
    payload = json.loads(json.dumps(script_to_json(zs.steps)))
    back = script_from_json(payload)
    assert [s.kind for s in back] == [s.kind for s in zs.steps]
    # Channels survive with their inverses.
    originals = [s for s in zs.steps if s.channel is not None]
    restored = [s for s in back if s.channel is not None]
    for orig, rest in zip(originals, restored):
        np.testing.assert_allclose(orig.channel.kraus[0], rest.channel.kraus[0])
        assert (orig.channel.declared_inverse is None) == (
            rest.channel.declared_inverse is None
        )


def test_witness_roundtrip_preserves_objective():
    _, w = random_witness(5, ext=(2, 1, 1), k=3)
    payload = json.loads(json.dumps(witness_to_json(w)))
    back = witness_from_json(payload)
    assert abs(objective(back) - objective(w)) < 1e-12
    assert payload["flag_is_classical"] is True


def test_baseline_witness_roundtrip_with_empty_groups():
    from nmk import baseline_witnesses

    rho = sample("density_hs", (2, 2, 2), 9, rank=2)
    w = baseline_witnesses(rho)[0]
    back = witness_from_json(json.loads(json.dumps(witness_to_json(w))))
    assert back.groups.a_prime == () and back.groups.b_prime == ("B'",)
    assert abs(objective(back) - objective(w)) < 1e-12


def test_canonical_dump_handles_numpy_scalars():
    out = dumps_canonical({"x": np.float64(0.5), "y": [np.int64(2)], "z": {"k": True}})
    assert json.loads(out) == {"x": 0.5, "y": [2], "z": {"k": True}}
