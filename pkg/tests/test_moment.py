import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _builders import A2, JORDAN, KRONECKER2, cgauss, dims, random_unitary
from symquiver import (
    INF,
    DimensionVector,
    OnePS,
    Quiver,
    Representation,
    SolveOptions,
    SymmetricStructure,
    TraceObstruction,
    filtration_invariance,
    finite_time_weight,
    gauge_act,
    gauge_residual,
    maximal_weight,
    moment_map,
    orthogonal_weight,
    random_representation,
    solve_gauge_equation,
    standard_form,
    weight_filtration,
)
from symquiver.moment import default_tol, subrep_onepS, theta, weight_components
from symquiver.quiver import generated_subrep, zero_representation


def a2(phi):
    return Representation(A2, dims(v1=1, v2=1), {"a": [[phi]]})


def test_moment_map_examples():
    assert moment_map(Representation(JORDAN, dims(v=1), {"l": [[5.0]]}))["v"][0, 0] == 0
    H = moment_map(a2(1.0))
    assert (H["v1"][0, 0], H["v2"][0, 0]) == (-1, 1)
    K = moment_map(Representation(KRONECKER2, dims(v1=1, v2=1), {"a": [[1.0]], "b": [[1j]]}))
    assert (K["v1"][0, 0], K["v2"][0, 0]) == (-2, 2)


def test_twisted_partial_trace():
    # one arrow with a 2-dimensional twist behaves like two parallel arrows
    d = DimensionVector({"v1": 2, "v2": 2}, {"a": 2})
    r = random_representation(A2, d, 0)
    a, b = r.phi["a"][:, 0::2], r.phi["a"][:, 1::2]
    K = moment_map(Representation(KRONECKER2, dims(v1=2, v2=2), {"a": a, "b": b}))
    H = moment_map(r)
    assert all(np.allclose(H[v], K[v], atol=1e-14) for v in H)


def test_gauge_residual_examples():
    t = 3.0
    assert gauge_residual(a2(math.sqrt(t)), {"v1": -t, "v2": t}) == pytest.approx(0, abs=1e-14)
    assert gauge_residual(zero_representation(A2, dims(v1=2, v2=1)), {"v1": 0, "v2": 0}) == 0
    assert gauge_residual(a2(1.0), {"v1": -4, "v2": 4}) == pytest.approx(math.sqrt(18))


def test_solver_examples():
    out, rep = solve_gauge_equation(a2(1.0), {"v1": -4, "v2": 4})
    assert rep.converged and rep.final_residual < 1e-8
    assert abs(out.phi["a"][0, 0]) == pytest.approx(2, abs=1e-8)
    assert gauge_act(rep.gauge, a2(1.0)).distance(out) <= 1e-10
    with pytest.raises(TraceObstruction):
        solve_gauge_equation(a2(1.0), {"v1": -1, "v2": 2})
    out, rep = solve_gauge_equation(a2(0.0), {"v1": -1, "v2": 1})
    assert not rep.converged
    assert rep.final_residual == pytest.approx(math.sqrt(2))


def test_solver_options_and_env(monkeypatch):
    opts = SolveOptions(max_iter=3)
    _, rep = solve_gauge_equation(a2(1.0), {"v1": -25, "v2": 25}, opts)
    assert rep.iterations <= 3 and not rep.converged
    monkeypatch.setenv("SYMQUIVER_TOL", "1e-4")
    assert default_tol() == 1e-4


@settings(max_examples=25, deadline=None)
@given(n1=st.integers(1, 3), n2=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_solver_trace_is_monotone(n1, n2, seed):
    r = random_representation(KRONECKER2, dims(v1=n1, v2=n2), seed)
    tau = {"v1": -n2 / n1, "v2": 1.0}
    _, rep = solve_gauge_equation(r, tau, SolveOptions(max_iter=2000))
    tr = rep.residual_trace
    assert all(b <= a for a, b in zip(tr, tr[1:]))
    assert len(rep.step_trace) == len(tr)


def test_finite_time_weight_examples():
    r = a2(1.0)
    zero = {"v1": np.zeros((1, 1)), "v2": np.zeros((1, 1))}
    assert finite_time_weight(r, zero, {"v1": 1, "v2": -1}, 2.0) == 0
    s = {"v1": np.zeros((1, 1)), "v2": -np.eye(1)}
    tau = {"v1": 0, "v2": 0}
    assert finite_time_weight(r, s, tau, 0.0) == pytest.approx(-1)
    late = finite_time_weight(r, s, tau, 10.0)
    assert -1e-8 < late < 0


def test_maximal_weight_examples():
    r = a2(1.0)
    tau = {"v1": -1, "v2": 1}
    assert maximal_weight(r, OnePS.diagonal({"v1": [0], "v2": [-1]}), tau) == 1
    assert maximal_weight(r, OnePS.diagonal({"v1": [-1], "v2": [0]}), tau) == INF
    K = random_representation(KRONECKER2, dims(v1=2, v2=3), 0)
    central = OnePS.diagonal({"v1": [4, 4], "v2": [4, 4, 4]})
    assert maximal_weight(K, central, {"v1": -3, "v2": 2}) == 0


def test_weight_components_follow_head_minus_tail():
    rng = np.random.default_rng(1)
    d = DimensionVector({"v1": 2, "v2": 3}, {"a": 2})
    r = random_representation(A2, d, 1)
    chi = OnePS({"v1": random_unitary(rng, 2), "v2": random_unitary(rng, 3)}, {"v1": np.array([0, 2]), "v2": np.array([-1, 1, 3])})
    coeff, wts = weight_components(r, chi)["a"]
    assert coeff.shape == wts.shape == (3, 4)
    assert np.array_equal(wts, np.array([-1, 1, 3])[:, None] - np.repeat([0, 2], 2)[None, :])


def test_weight_filtration_examples():
    steps = weight_filtration(OnePS.diagonal({"v1": [0], "v2": [-1]}))
    assert [s.value for s in steps] == [-1, 0]
    assert {v: u.shape[1] for v, u in steps[0].subspace.items()} == {"v1": 0, "v2": 1}
    assert {v: u.shape[1] for v, u in steps[1].subspace.items()} == {"v1": 1, "v2": 1}
    assert len(weight_filtration(OnePS.diagonal({"v": [2, 2]}))) == 1
    two = weight_filtration(OnePS.diagonal({"v": [1, -1]}))
    assert len(two) == 2 and np.allclose(two[0].subspace["v"], [[0], [1]])


def test_filtration_invariance_examples():
    assert not filtration_invariance(a2(1.0), OnePS.diagonal({"v1": [-1], "v2": [0]}))
    zero = a2(0.0)
    for w in ([-1], [0], [3]):
        assert filtration_invariance(zero, OnePS.diagonal({"v1": w, "v2": [0]}))


def test_subrep_onepS_weight_is_theta():
    r = random_representation(KRONECKER2, dims(v1=2, v2=3), 2)
    sub = generated_subrep(r, [("v1", np.array([1.0, 0.0]))])
    tau = {"v1": -3.0, "v2": 2.0}
    assert maximal_weight(r, subrep_onepS(sub, r.dims), tau) == pytest.approx(theta(tau, sub))


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_maximal_weight_scales(k, seed):
    rng = np.random.default_rng(seed)
    r = random_representation(KRONECKER2, dims(v1=2, v2=2), seed)
    w = {"v1": rng.integers(-2, 3, 2), "v2": rng.integers(-2, 3, 2)}
    chi = OnePS.diagonal(w)
    tau = {"v1": -1.5, "v2": 1.5}
    base, scaled = maximal_weight(r, chi, tau), maximal_weight(r, chi.scaled(k), tau)
    if base == INF:
        assert scaled == INF
    else:
        assert scaled == pytest.approx(k * base)


# orthogonal weights -------------------------------------------------------------

PAIR = Quiver.from_edges(["i", "i*"], [("g", "i", "i"), ("g*", "i*", "i*")])
S_PAIR = SymmetricStructure({"i": "i*", "i*": "i"}, {"g": "g*", "g*": "g"}, 1)


def structured_chi(q_basis, w):
    return OnePS({"i": q_basis, "i*": q_basis.conj()}, {"i": np.asarray(w), "i*": -np.asarray(w)})


def test_orthogonal_weight_examples():
    d = dims(**{"i": 2, "i*": 2})
    C = standard_form(PAIR, d, S_PAIR)
    r = zero_representation(PAIR, d).replace({"g": np.zeros((2, 2)), "g*": np.zeros((2, 2))})
    tau = {"i": 1.0, "i*": -1.0}
    chi = structured_chi(np.eye(2, dtype=complex), [1, 0])
    assert orthogonal_weight(r, chi, tau, S_PAIR, C) == -2
    assert maximal_weight(r, chi, tau) == -2
    assert orthogonal_weight(r, structured_chi(np.eye(2, dtype=complex), [0, 0]), tau, S_PAIR, C) == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), triangular=st.booleans())
def test_orthogonal_weight_agrees_with_plain(seed, triangular):
    rng = np.random.default_rng(seed)
    n = 3
    d = dims(**{"i": n, "i*": n})
    C = standard_form(PAIR, d, S_PAIR)
    Q = random_unitary(rng, n)
    w = np.sort(rng.integers(-2, 3, n))
    A = cgauss(rng, n, n)
    if triangular:
        A[w[:, None] > w[None, :]] = 0
    A = Q @ A @ Q.conj().T
    r = zero_representation(PAIR, d).replace({"g": A, "g*": -A.T})
    tau = {"i": float(rng.integers(-3, 4)), "i*": 0.0}
    tau["i*"] = -tau["i"]
    chi = structured_chi(Q, w)
    ow, mw = orthogonal_weight(r, chi, tau, S_PAIR, C), maximal_weight(r, chi, tau)
    assert (ow == INF) == (mw == INF)
    if ow != INF:
        assert abs(ow - mw) <= 1e-12
