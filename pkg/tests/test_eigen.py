import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boundpair import eigen as eg
from boundpair.artifacts import HashMismatchError, load_golden, metadata, render_csv
from boundpair.model import ModelParams, build_hamiltonian, zone_grid
from boundpair.validation import bound_oracle_error, single_exc_oracle_error

from conftest import quiet

GOLDEN = "tests/data/phase_shifts_M13_U50.csv"
GOLDEN_COLUMNS = ["ell_K", "band", "Ka", "p_re", "p_im", "delta", "modulus", "re_E", "im_E", "residual"]


# --- oracle first -----------------------------------------------------------


@pytest.mark.parametrize("M", [5, 7, 11])
def test_single_excitation_energies_match_oracle(M):
    assert single_exc_oracle_error(ModelParams(M=M)) <= 1e-10


@pytest.mark.parametrize("M", [7, 11, 13])
def test_bound_energies_match_oracle(M):
    err, count = bound_oracle_error(ModelParams(M=M))
    assert count == M
    assert err <= 1e-10


def test_bound_energy_finite_ring_correction_shrinks():
    # the closed form ignores the ring seam; the error falls off geometrically with M
    errs = [bound_oracle_error(ModelParams(M=M))[0] for M in (5, 7, 9)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] < 1e-6


@pytest.mark.parametrize("M", [11, 13])
def test_alpha_state_is_eigenvector(M):
    p = ModelParams(M=M)
    r = p.rates()
    h = build_hamiltonian(p, r, 2)
    hn = np.linalg.norm(h.matrix, 2)
    for K in zone_grid(M):
        s = eg.bound_state(p, r, K)
        v = s.pair_vector(p, h.basis)
        assert np.linalg.norm(h.matrix @ v - s.detuning * v) <= 1e-10 * hn


def test_single_state_is_eigenvector(params, rates):
    h = build_hamiltonian(params, rates, 1)
    for ell in range(params.M):
        s = eg.single_exc_state(params, rates, ell)
        assert np.linalg.norm(h.matrix @ s.amplitudes - s.detuning * s.amplitudes) < 1e-13
        assert s.energy == pytest.approx(params.omega0 + s.detuning)


def test_oracle_biorthogonal(params, rates):
    spec = eg.diagonalize_oracle(build_hamiltonian(params, rates, 2))
    assert np.allclose(spec.left.conj().T @ spec.right, np.eye(len(spec.eigenvalues)), atol=1e-10)
    assert spec.residuals.max() < 1e-12
    with pytest.raises(eg.OracleError):
        eg.diagonalize_oracle(build_hamiltonian(params, rates, 2), max_dim=5)


def test_sector_projection_is_invariant(params, rates):
    h2 = build_hamiltonian(params, rates, 2)
    for K in zone_grid(params.M):
        _, B, leak = eg.sector_hamiltonian(params, h2, K)
        assert leak < 1e-12
        assert np.allclose(B.conj().T @ B, np.eye(params.half))


def test_sector_states_reproduce_oracle_spectrum(params, rates):
    h2 = build_hamiltonian(params, rates, 2)
    spec = eg.diagonalize_oracle(h2)
    mine = np.concatenate([[s.detuning for s in eg.sector_states(params, rates, K, h2)] for K in zone_grid(params.M)])
    assert np.allclose(np.sort_complex(mine), np.sort_complex(spec.eigenvalues), atol=1e-12)


def test_bound_band_detached(params, rates):
    h2 = build_hamiltonian(params, rates, 2)
    gap = np.inf
    for K in zone_grid(params.M):
        st_ = eg.sector_states(params, rates, K, h2)
        b = [s.detuning.real for s in st_ if s.kind == "bound"]
        sc = [s.detuning.real for s in st_ if s.kind == "scattering"]
        gap = min(gap, np.abs(np.subtract.outer(b, sc)).min())
    assert gap >= params.U - 2 * abs(rates.Gamma1)


# --- closed forms -------------------------------------------------------------


def test_tight_state_is_nearest_neighbour_pair(params, rates):
    s = eg.bound_state(params, rates, 0.0, tight=True)
    assert s.psi[0] == 1 and np.all(s.psi[1:] == 0)
    assert s.momentum_distribution(0.3) == pytest.approx(4 / params.M * np.cos(0.3) ** 2)


@given(st.integers(0, 6), st.floats(-np.pi, np.pi))
def test_alpha_reflection_and_even_distribution(ell, q):
    p = ModelParams()
    r = p.rates()
    K = zone_grid(7)[ell]
    assert eg.bound_alpha(p, r, K) == pytest.approx(eg.bound_alpha(p, r, -K))
    s = eg.bound_state(p, r, K)
    assert s.momentum_distribution(q) == pytest.approx(s.momentum_distribution(-q), abs=1e-14)
    assert s.momentum_distribution(q) == pytest.approx(s.momentum_distribution(q + 2 * np.pi), abs=1e-12)


@pytest.mark.parametrize("tight", [True, False])
@pytest.mark.parametrize("mode", ["exact", "approx"])
def test_branching_sums_to_one(params, rates, tight, mode):
    for K in zone_grid(params.M):
        s = eg.bound_state(params, rates, K, tight=tight)
        tab = eg.branching_table(params, rates, s, mode)
        assert tab.b.sum() == pytest.approx(1.0, abs=1e-12)
        # the grid sum of |eta|^2 is exactly 2, so b = |eta|^2 / 2
        assert np.allclose(tab.b, s.momentum_distribution(K / 2 - tab.ks) / 2, atol=1e-14)
        assert tab.partial_rates.sum() == pytest.approx(tab.total_rate)


def test_unnormalised_state_rejected(params, rates):
    s = eg.bound_state(params, rates, 0.0)
    bad = eg.TwoExcState(s.M, s.K, "bound", 2 * s.psi, s.detuning, s.omega0)
    with pytest.raises(ValueError):
        bad.momentum_distribution(0.0)


def test_bound_state_gate():
    p = quiet(U=0.05)
    with pytest.raises(eg.BoundStateError):
        eg.bound_state(p, p.rates(), 0.0)
    z = quiet(U=0.0)
    with pytest.raises(eg.PhysicsError):
        eg.bound_alpha(z, z.rates(), 0.0)


def test_approximate_decay_collapse(params, rates):
    assert -2 * eg.approx_detuning(params, "bound").imag == pytest.approx(2 * params.gamma0)
    assert -2 * eg.approx_detuning(params, "scattering").imag == pytest.approx(2 * params.gamma0)
    h2 = build_hamiltonian(params, rates, 2)
    for K in zone_grid(params.M):
        for s in eg.sector_states(params, rates, K, h2):
            assert abs(-2 * s.detuning.imag - 2 * params.gamma0) <= 2 * abs(rates.Gamma1)


def test_approx_detuning_rejects_unknown(params):
    with pytest.raises(ValueError):
        eg.approx_detuning(params, "triplet")


def test_open_chain_pair_vector_normalised():
    p = ModelParams(M=7, boundary="open")
    s = eg.bound_state(p, p.rates(), 0.0)
    assert np.linalg.norm(s.pair_vector(p)) == pytest.approx(1.0)


# --- scattering phase shifts ---------------------------------------------------


@pytest.fixture(scope="module")
def table13():
    p = ModelParams(M=13)
    return eg.phase_shift_table(p, p.rates())


def test_phase_shift_fits_are_clean(table13):
    assert len(table13) == 13 * 5
    assert max(r["residual"] for r in table13) <= 1e-6
    assert all(abs(r["modulus"] - 1) < 1e-9 for r in table13)


def test_phase_shift_smooth_in_p(table13):
    bound = 3 * 2 * np.pi / 13
    for ell in range(13):
        d = [r["delta"] for r in table13 if r["ell_K"] == ell]
        assert np.abs(np.diff(d)).max() < bound


def test_phase_shift_approaches_hard_core_limit():
    def dev(U):
        p = ModelParams(M=13, U=U)
        rows = eg.phase_shift_table(p, p.rates())
        return np.array([abs(np.angle(np.exp(1j * (r["delta"] - eg.hard_core_phase_shift(r["p_re"])))))
                         for r in rows])

    d50, d100, d200 = dev(50.0), dev(100.0), dev(200.0)
    assert d100.max() < d50.max() < 0.05
    assert d200.max() < d100.max()


def test_golden_table_reproduces(params):
    p = ModelParams(M=13)
    meta, cols, rows = load_golden(GOLDEN, p)
    assert cols == GOLDEN_COLUMNS
    fresh = eg.phase_shift_table(p, p.rates())
    text = render_csv(metadata(p, table="phase_shifts"), GOLDEN_COLUMNS, [[r[c] for c in GOLDEN_COLUMNS] for r in fresh])
    with open(GOLDEN) as fh:
        assert fh.read() == text
    with pytest.raises(HashMismatchError):
        load_golden(GOLDEN, params)


def test_extract_phase_shift_rejects_bound(params, rates):
    with pytest.raises(eg.FitError):
        eg.extract_phase_shift(eg.bound_state(params, rates, 0.0), rates)


def test_zero_interaction_is_free_fermion_spectrum():
    # hard-core bosons on an odd ring at U = 0 map onto fermions with twisted momenta
    p = quiet(M=7, U=0.0)
    r = p.rates()
    spec = eg.diagonalize_oracle(build_hamiltonian(p, r, 2))
    ref = eg.antiperiodic_pair_sums(r, 7)
    assert np.allclose(np.sort_complex(spec.eigenvalues), np.sort_complex(ref), atol=1e-12)
