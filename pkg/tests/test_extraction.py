"""Extraction chain: swap unitaries, equivalence residuals, tomography, commutants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qselftest import devices as dv
from qselftest import extraction as ex
from qselftest import hilbert as hb
from qselftest.errors import ValidationError

X = np.array([[0.0, 1.0], [1.0, 0.0]])


def h_circuit():
    return dv.IdealCircuit(1, (dv.CircuitGate("g1", (0,), dv.builtin_gate("H")),), "0")


def bell_circuit():
    return dv.IdealCircuit(
        2,
        (
            dv.CircuitGate("g1", (0,), dv.builtin_gate("H")),
            dv.CircuitGate("g2", (0, 1), dv.builtin_gate("CNOT")),
        ),
        "00",
    )


def tomo_probs(vec, n):
    """Exact angle-projector statistics of a pure state."""
    out = {}
    for key in ex.tomo_settings(n):
        proj = np.array([[1.0]], dtype=np.complex128)
        for a in key:
            v = np.array([np.cos(a), np.sin(a)])
            proj = np.kron(proj, np.outer(v, v))
        out[key] = float(np.real(vec.conj() @ proj @ vec))
    return out


class TestBuildNot:
    def test_honest_is_pauli_x(self):
        n = ex.build_not(dv.honest_device(), "A", 0)
        assert np.abs(n.matrix - X).max() <= 1e-14

    @given(st.floats(-3.0, 3.0, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_rotated_not_is_hermitian_involution(self, theta):
        dev = dv.rotated_device(theta=theta)
        n = ex.build_not(dev, "A", 0).matrix
        assert np.abs(n @ n - np.eye(2)).max() <= 1e-10
        assert np.abs(n - n.conj().T).max() <= 1e-10

    def test_b_side_and_van_dam_still_involutions(self):
        for dev, side in [(dv.honest_device(), "B"), (dv.van_dam_device(), "A")]:
            n = ex.build_not(dev, side, 0).matrix
            assert np.abs(n @ n - np.eye(n.shape[0])).max() <= 1e-10


class TestSwapConstruction:
    def test_factors_are_the_crossed_nots(self):
        c1, c2 = ex.swap_factors(dv.honest_device(), "A", 0)
        e00, e11 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        assert np.abs(c1 - (np.kron(e00, np.eye(2)) + np.kron(e11, X))).max() <= 1e-12
        assert np.abs(c2 - (np.kron(np.eye(2), e00) + np.kron(X, e11))).max() <= 1e-12

    def test_moves_wire_content_into_logical_slot(self):
        u = ex.build_swap_extraction(dv.honest_device(), "A", 0).matrix
        for a in (0.0, math.pi / 2, math.pi / 8):
            amp = np.array([math.cos(a), math.sin(a)])
            got = u @ np.kron([1.0, 0.0], amp)
            assert np.abs(got - np.kron(amp, [1.0, 0.0])).max() <= 1e-12

    def test_unitary_for_every_builtin(self):
        for name in ("honest", "vandam"):
            dev = dv.resolve_device(f"builtin:{name}")
            u = ex.build_swap_extraction(dev, "A", 0).matrix
            assert np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() <= 1e-10


class TestStateEquivalence:
    def test_honest_all_residuals_vanish(self):
        rep = ex.certify_state_equivalence(dv.honest_device())
        assert rep.s_rank == 4
        assert rep.state_residual <= 1e-10
        assert rep.max_projector_residual <= 1e-10
        # twelve projector residuals: 2 sides x 6 angles
        assert len(rep.projector_residuals) == 12

    def test_rotated_residuals_vanish(self):
        dev = dv.rotated_device(
            v_a=[dv.rotation(np.pi / 7)], v_b=[dv.rotation(np.pi / 5)]
        )
        rep = ex.certify_state_equivalence(dev)
        assert rep.state_residual <= 1e-9
        assert rep.max_projector_residual <= 1e-9

    def test_depolarized_residual_is_root_three_quarters_p(self):
        for p in (1e-4, 1e-3, 1e-2):
            rep = ex.certify_state_equivalence(dv.noisy_source_device(p=p))
            assert rep.state_residual == pytest.approx(math.sqrt(3 * p / 4), abs=1e-9)
            assert rep.s_rank == 9

    def test_depolarized_quarter_root_exponent(self):
        # deviation seen by the pair test is p/4; calibrate at the largest
        # noise then check the promised fourth-root growth caps the rest
        ps = (1e-4, 1e-3, 1e-2)
        res = [
            ex.certify_state_equivalence(dv.noisy_source_device(p=p)).state_residual
            for p in ps
        ]
        c = res[-1] / (ps[-1] / 4) ** 0.25
        for p, r in zip(ps, res):
            assert r <= c * (p / 4) ** 0.25 + 1e-12
        slope = (math.log(res[-1]) - math.log(res[0])) / (
            math.log(ps[-1]) - math.log(ps[0])
        )
        assert slope >= 0.25

    def test_van_dam_large_residuals_golden(self):
        rep = ex.certify_state_equivalence(dv.van_dam_device())
        assert rep.s_rank == 7
        assert rep.state_residual == pytest.approx(math.sqrt(0.5), abs=1e-6)
        assert rep.max_projector_residual == pytest.approx(0.603553, abs=1e-6)
        u = rep.u_bar_a[0].matrix
        assert u.shape == (8, 8)
        assert np.abs(u @ u.conj().T - np.eye(8)).max() <= 1e-10

    def test_report_json_shape(self):
        js = ex.certify_state_equivalence(dv.honest_device()).to_json()
        assert js["s_rank"] == 4
        assert set(js["projector_residuals"]) == {
            f"{s}0:{k}"
            for s in "AB"
            for k in ("0", "pi/8", "pi/4", "pi/2", "5pi/8", "3pi/4")
        }


class TestGateEquivalence:
    def test_honest_h_exact(self):
        rep = ex.certify_gate_equivalence(dv.honest_device(h_circuit()), h_circuit(), 1)
        assert rep.gate_residual <= 1e-9
        assert rep.factorization_residual <= 1e-9
        assert np.abs(rep.w_matrix - np.eye(2)).max() <= 1e-10

    def test_rotated_h_exact(self):
        circ = h_circuit()
        dev = dv.rotated_device(circ, theta=0.4)
        rep = ex.certify_gate_equivalence(dev, circ, 1)
        assert rep.gate_residual <= 1e-9

    def test_wrong_gate_residual_golden(self):
        circ = h_circuit()
        base = dv.honest_device(circ)
        gates = dict(base.gates)
        gates[("A", "g1")] = dv.DeviceGate("A", (0,), dv.rotation(np.pi / 8))
        bad = dv.DeviceModel(
            base.layout, base.source, gates, dict(base.frames), base.zero_states
        )
        rep = ex.certify_gate_equivalence(bad, circ, 1)
        # restricted norm equals the full spectral distance ||H - R(pi/8)|| here
        assert rep.gate_residual == pytest.approx(2.0, abs=1e-9)

    def test_honest_two_wire_gate_exact(self):
        circ = bell_circuit()
        rep = ex.certify_gate_equivalence(dv.honest_device(circ), circ, 2)
        assert rep.s_rank == 16
        assert rep.gate_residual <= 1e-9
        assert np.abs(rep.w_matrix - np.eye(4)).max() <= 1e-10

    def test_source_noise_does_not_indict_the_gate(self):
        circ = h_circuit()
        rep = ex.certify_gate_equivalence(dv.noisy_source_device(circ, p=1e-2), circ, 1)
        assert rep.gate_residual <= 1e-10
        assert rep.state_residual == pytest.approx(math.sqrt(3e-2 / 4), abs=1e-9)

    def test_gate_index_bounds(self):
        with pytest.raises(ValidationError, match="outside"):
            ex.certify_gate_equivalence(dv.honest_device(h_circuit()), h_circuit(), 2)


class TestRestrictedEquivalences:
    """The extraction pulls physical operations back to logical ones on S."""

    def test_physical_not_matches_logical_not_on_s(self):
        dev = dv.honest_device()
        rep = ex.certify_state_equivalence(dev)
        _, _, placed = ex._swap_ops(dev, (0,))
        n_phys = ex.build_not(dev, "A", 0)
        n_log = hb.LocalOperator.unitary((0,), X)

        def composite(x):
            ext = ex._extended_zero(x, 1)
            for op in placed:
                ext = hb.apply_operator(op, ext)
            ext = hb.apply_operator(n_log, ext)
            for op in reversed(placed):
                ext = hb.apply_operator(
                    hb.LocalOperator(op.targets, op.matrix.conj().T, "unitary"), ext
                )
            return hb.PhysState._wrap(x.layout, ext.vec[: x.layout.total])

        assert hb.op_norm_on(rep.s_basis, n_phys, composite) <= 1e-10


class TestTomography:
    def test_settings_counts(self):
        assert [len(ex.tomo_settings(n)) for n in (1, 2, 3)] == [3, 9, 27]

    def test_zero_state_exact(self):
        v = np.array([1.0, 0.0])
        rho = ex.tomo_reconstruct(tomo_probs(v, 1), 1)
        assert np.abs(rho - np.outer(v, v)).max() <= 1e-12

    def test_bell_state_exact(self):
        v = np.zeros(4)
        v[0] = v[3] = 2**-0.5
        rho = ex.tomo_reconstruct(tomo_probs(v, 2), 2)
        assert np.abs(rho - np.outer(v, v)).max() <= 1e-10

    def test_random_real_pure_states_exact(self):
        rng = np.random.default_rng(7)
        for n in (1, 2, 3):
            for _ in range(8):
                v = rng.normal(size=1 << n)
                v /= np.linalg.norm(v)
                rho = ex.tomo_reconstruct(tomo_probs(v, n), n)
                assert np.abs(rho - np.outer(v, v)).max() <= 1e-10

    def test_mixed_real_target_falls_back_to_inversion(self):
        rho_t = np.eye(4) / 4
        tbl = {}
        for key in ex.tomo_settings(2):
            proj = np.array([[1.0]], dtype=np.complex128)
            for a in key:
                u = np.array([np.cos(a), np.sin(a)])
                proj = np.kron(proj, np.outer(u, u))
            tbl[key] = float(np.real(np.trace(rho_t @ proj)))
        assert np.abs(ex.tomo_reconstruct(tbl, 2) - rho_t).max() <= 1e-12

    def test_noise_robustness_root_eps_budget(self):
        g = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])
        rng = np.random.default_rng(11)
        errs = {}
        for eps in (1e-6, 1e-4):
            worst = 0.0
            for _ in range(10):
                tbl = {
                    k: p + rng.uniform(-eps, eps) for k, p in tomo_probs(g, 1).items()
                }
                rho = ex.tomo_reconstruct(tbl, 1)
                worst = max(worst, np.linalg.norm(rho - np.outer(g, g), 2))
            errs[eps] = worst
        c = errs[1e-4] / math.sqrt(1e-4)
        assert errs[1e-6] <= c * math.sqrt(1e-6)
        slope = (math.log(errs[1e-4]) - math.log(errs[1e-6])) / math.log(100)
        assert slope >= 0.5

    def test_angle_canonicalization_and_errors(self):
        v = np.array([1.0, 0.0])
        tbl = {(k[0] + 1e-12,): p for k, p in tomo_probs(v, 1).items()}
        assert np.abs(ex.tomo_reconstruct(tbl, 1) - np.diag([1.0, 0.0])).max() <= 1e-9
        with pytest.raises(ValidationError, match="missing"):
            ex.tomo_reconstruct({(0.0,): 1.0}, 1)
        with pytest.raises(ValidationError, match="not one of"):
            ex.tomo_reconstruct({(0.3,): 1.0, (0.7,): 0.0, (1.1,): 0.0}, 1)
        with pytest.raises(ValidationError, match="1..3"):
            ex.tomo_reconstruct({}, 4)


class TestCommutantFactor:
    def test_exact_product_recovers_factor(self):
        u = np.kron(np.eye(2), dv.builtin_gate("H"))
        w, res = ex.commutant_factor(u, 1)
        assert res <= 1e-12
        assert np.abs(w - dv.builtin_gate("H")).max() <= 1e-12

    def test_cnot_not_factorable_golden(self):
        w, res = ex.commutant_factor(dv.builtin_gate("CNOT"), 1)
        assert w is None
        assert res == 2.0

    def test_left_rotation_residual_is_analytic(self):
        # best factor keeps the right leg; residual = ||R(theta) - Id|| = 2|sin(theta/2)|
        theta = 0.3
        u = np.kron(dv.rotation(theta), dv.rotation(1.1))
        _, res = ex.commutant_factor(u, 1)
        assert res == pytest.approx(2 * math.sin(theta / 2), abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_random_products_both_sizes(self, seed):
        rng = np.random.default_rng(seed)
        for n in (1, 2):
            d = 1 << n
            m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            w_true, _ = np.linalg.qr(m)
            w, res = ex.commutant_factor(np.kron(np.eye(d), w_true), n)
            assert res <= 1e-12
            # recovered factor matches up to nothing: the average is exact
            assert np.abs(w - w_true).max() <= 1e-10

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_perturbation_linear_budget(self, seed):
        rng = np.random.default_rng(seed)
        k = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        k = (k + k.conj().T) / 2
        k /= np.linalg.norm(k, 2)
        evals, evecs = np.linalg.eigh(k)
        for eps in (1e-4, 1e-3):
            pert = evecs @ np.diag(np.exp(1j * eps * evals)) @ evecs.conj().T
            u = np.kron(np.eye(2), dv.builtin_gate("H")) @ pert
            _, res = ex.commutant_factor(u, 1)
            assert res <= 10 * eps

    def test_nonzero_residual_for_entangling_input(self):
        for u in (dv.builtin_gate("CNOT"), dv.builtin_gate("SWAP")):
            _, res = ex.commutant_factor(u, 1)
            assert res >= 0.9

    def test_input_validation(self):
        with pytest.raises(ValidationError, match="unitary"):
            ex.commutant_factor(np.ones((4, 4)), 1)
        with pytest.raises(ValidationError, match="divisible"):
            ex.commutant_factor(np.eye(6), 2)


class TestCollapseSymmetry:
    def test_honest_vanishes(self):
        assert ex.check_collapse_symmetry(dv.honest_device())["max_side_diff"] <= 1e-12

    def test_depolarized_grows_like_root_p(self):
        vals = []
        for p in (1e-4, 1e-2, 0.1):
            r = ex.check_collapse_symmetry(dv.noisy_source_device(p=p))
            vals.append(r["max_side_diff"])
            assert r["max_side_diff"] == pytest.approx(math.sqrt(p / 2), abs=1e-9)
        assert vals == sorted(vals)

    def test_product_source_golden(self):
        lay = dv.honest_device().layout
        prod = np.zeros(4, dtype=np.complex128)
        prod[0] = 1.0
        dev = dv.replace_source(dv.honest_device(), hb.PhysState._wrap(lay.full, prod))
        r = ex.check_collapse_symmetry(dev)
        assert r["max_side_diff"] == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert r["per_angle"]["pi/8"]["side_diff"] == pytest.approx(0.5, abs=1e-12)
        # the bound sqrt(2) cos sin at pi/8 from direct evaluation
        assert r["max_side_diff"] >= math.sqrt(2) * math.cos(math.pi / 8) * math.sin(
            math.pi / 8
        )


class TestBasisGeometry:
    def test_honest_lengths_and_orthogonality(self):
        r = ex.check_basis_geometry(dv.honest_device(), 0, 0.0, math.pi / 8)
        want = (
            math.cos(math.pi / 8) / math.sqrt(2),
            math.sin(math.pi / 8) / math.sqrt(2),
            math.sin(math.pi / 8) / math.sqrt(2),
            math.cos(math.pi / 8) / math.sqrt(2),
        )
        assert r.lengths == pytest.approx(want, abs=1e-12)
        assert r.ideal_lengths == pytest.approx(want, abs=1e-12)
        assert r.max_cross_overlap <= 1e-12
        assert r.max_length_error <= 1e-12

    def test_honest_change_of_basis_matches_ideal(self):
        r = ex.check_basis_geometry(
            dv.honest_device(), 0, 0.0, math.pi / 8, alpha2=0.0, beta2=math.pi / 4
        )
        assert r.max_change_error <= 1e-10
        # blockwise rotation by the angle increment
        c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
        assert r.change_matrix[0, 0] == pytest.approx(c, abs=1e-12)
        assert r.change_matrix[1, 0] == pytest.approx(s, abs=1e-12)

    def test_depolarized_length_error_below_root_p(self):
        for p in (1e-4, 1e-2):
            r = ex.check_basis_geometry(dv.noisy_source_device(p=p), 0, 0.0, math.pi / 8)
            assert r.max_length_error <= math.sqrt(p)

    def test_degenerate_angles_rejected(self):
        with pytest.raises(ValidationError):
            ex.check_basis_geometry(dv.honest_device(), 0, 0.0, 0.0)


class TestFrameBlindness:
    """Rotating the local frames must not move any reported number."""

    @given(st.floats(-math.pi, math.pi, allow_nan=False))
    @settings(max_examples=10, deadline=None)
    def test_state_report_invariant(self, theta):
        honest = ex.certify_state_equivalence(dv.honest_device())
        rot = ex.certify_state_equivalence(dv.rotated_device(theta=theta))
        assert rot.state_residual == pytest.approx(honest.state_residual, abs=1e-8)
        assert rot.s_rank == honest.s_rank
        for key, val in honest.projector_residuals.items():
            assert rot.projector_residuals[key] == pytest.approx(val, abs=1e-8)
