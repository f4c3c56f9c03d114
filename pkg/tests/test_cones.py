import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from rpchain.cones import (ConeVerdict, background_membership, background_generators,
                           dual_witness, ergodicity_check, images_in_cone, matrix_unit_generators,
                           operator_preserves, positive_ground_section, random_generators,
                           reflection_membership, seam_interaction, semigroup_operator,
                           trotter_domination_check, w0_value)
from rpchain.fock import CompositeBasis, PhononBasisSpec
from rpchain.model import InteractionSpec, ModelParams
from rpchain.operators import build_hamiltonian, build_transformed, dn_full
from rpchain.spectral import ground_state
from rpchain.transforms import (Bipartition, SectorMatrices, cdw_vacuum_fermion, devectorize,
                                vectorize)


def test_verdict_rejects_strict_non_member():
    with pytest.raises(ValueError):
        ConeVerdict(member=False, strict=True, worst_margin=-1.0)
    d = ConeVerdict(True, False, 0.0, witness=np.int64(3)).to_dict()
    assert d["witness"] == 3 and isinstance(d["witness"], int)


# ------------------------------------------------------------ background cone

def _block_vector(basis, blocks):
    """blocks: {fermion index: phonon vector}."""
    psi = np.zeros(basis.dim, dtype=complex)
    for f, v in blocks.items():
        psi[f * basis.n_phonon:(f + 1) * basis.n_phonon] = v
    return psi


def test_background_vacuum_gaussian_block():
    basis = CompositeBasis.half_filled(1, PhononBasisSpec.fock(4))
    vac = np.zeros(basis.n_phonon)
    vac[0] = 1.0
    psi = _block_vector(basis, {0: vac})
    v = background_membership(psi, basis)
    assert v.member and not v.strict
    # restricted to its own block the Gaussian is strictly positive
    single = CompositeBasis.half_filled(1, PhononBasisSpec.fock(4))
    both = _block_vector(single, {0: vac, 1: vac})
    assert background_membership(both, single).strict
    assert background_membership(-1j * both, single).strict


def test_background_negated_block_is_caught():
    basis = CompositeBasis.half_filled(1, PhononBasisSpec.fock(4))
    vac = np.zeros(basis.n_phonon)
    vac[0] = 1.0
    psi = _block_vector(basis, {0: 2 * vac, 1: -vac})
    v = background_membership(psi, basis)
    assert not v.member
    assert v.witness["config"] == basis.configs()[1]


def test_background_rejects_irreducibly_complex_vector():
    basis = CompositeBasis.half_filled(1, PhononBasisSpec.fock(2))
    psi = np.zeros(basis.dim, dtype=complex)
    psi[0], psi[basis.n_phonon] = 1.0, 1j
    with pytest.raises(ValueError):
        background_membership(psi, basis)


def test_background_ground_state_strict():
    p = ModelParams(ell=1, g=0.3, n_max=8)
    basis = CompositeBasis.half_filled(1, PhononBasisSpec.fock(8))
    _, psi, _ = ground_state(build_hamiltonian(p, basis))
    assert background_membership(psi, basis).strict


def test_background_semigroup_preserves_and_position_does_not():
    p = ModelParams(ell=1, g=0.3, n_max=12)
    basis = CompositeBasis.half_filled(1, PhononBasisSpec.fock(12))
    H = build_hamiltonian(p, basis).toarray()
    assert background_generators(basis, 3).shape == (basis.dim, 2 * 9)
    v = operator_preserves(sla.expm(-0.5 * H), basis, cone="background", grid_nodes=3)
    assert v.member and v.mode == "exhaustive"
    _, _, phi, _ = basis.phonon.local_ops()
    X = np.kron(np.eye(basis.n_fermion), np.kron(phi, np.eye(basis.d)))
    assert not operator_preserves(X, basis, cone="background", grid_nodes=3).member


# ------------------------------------------------------------ reflection cone

def test_cdw_vacuum_is_rank_one_member():
    ell = 3
    p = ModelParams(ell=ell, n_max=0)
    half = CompositeBasis.half_filled(ell, PhononBasisSpec.fock(0))
    psi = cdw_vacuum_fermion(ell)[np.asarray(half.masks)]
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert reflection_membership(psi, half, params=p, picture="original").strict is False
    assert reflection_membership(psi, half, params=p, picture="original").member
    # in the transformed picture it is the empty vacuum: one nonzero sector entry
    bal = CompositeBasis.balanced(ell, half.phonon)
    vac = np.zeros(bal.dim)
    vac[bal.masks.index(0)] = 1.0
    bip = Bipartition(ell, bal.phonon)
    ranks = [np.linalg.matrix_rank(b) for b in vectorize(vac, bal, bip).blocks.values() if b.size]
    assert sum(ranks) == 1


def test_random_generators_are_members_and_self_dual():
    bal = CompositeBasis.balanced(3, PhononBasisSpec.fock(1))
    X = random_generators(bal, 12, seed=3)
    assert images_in_cone(X, bal).member
    G = (X.conj().T @ X).real
    assert G.min() >= -1e-10
    # per-sample streams: a prefix does not depend on the sample count
    assert np.array_equal(random_generators(bal, 5, seed=3), X[:, :5])


def test_non_member_has_dual_witness():
    bal = CompositeBasis.balanced(3, PhononBasisSpec.fock(0))
    bip = Bipartition(3, bal.phonon)
    blocks = {q: np.zeros((len(ix),) * 2, dtype=complex) for q, ix in bip.sector_indices.items()}
    q = max(blocks, key=lambda k: blocks[k].shape[0])
    blocks[q][0, 0], blocks[q][1, 1] = 1.0, -0.5
    psi = devectorize(SectorMatrices(blocks), bal, bip)
    v = reflection_membership(psi, bal, bip=bip)
    assert not v.member and v.witness == q
    y = dual_witness(psi, bal, bip)
    assert reflection_membership(y, bal).member
    assert np.vdot(y, psi).real < 0


def test_matrix_unit_generators_count():
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(1))
    bip = Bipartition(1, bal.phonon)
    sizes = [len(ix) for ix in bip.sector_indices.values()]
    assert matrix_unit_generators(bal).shape[1] == sum(s * s for s in sizes)


def test_congruence_always_preserves():
    ell = 3
    bal = CompositeBasis.balanced(ell, PhononBasisSpec.fock(0))
    bip = Bipartition(ell, bal.phonon)
    rng = np.random.default_rng(0)
    # sector-preserving left operator: random combination of dn products
    B = sum(rng.standard_normal() * bip.left_op(dn_full(ell, i) @ dn_full(ell, j))
            for i in range(-ell, 0) for j in range(-ell, 0)) + bip.left_op()
    A = (bip.L(B, bal) @ bip.R(B.conj().T, bal))
    assert operator_preserves(A, bal, n_samples=30, bip=bip).member
    assert not operator_preserves(-sp.identity(bal.dim), bal, n_samples=5, bip=bip).member


def _l1_params(interaction):
    return ModelParams(ell=1, g=0.3, interaction=interaction, n_max=2)


@pytest.mark.parametrize("beta", [0.1, 1.0])
def test_semigroup_preserves_exhaustively(beta):
    p = _l1_params(InteractionSpec.nearest(1.0))
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(2))
    H = build_transformed(p, bal)
    v = operator_preserves(semigroup_operator(H.matrix, beta), bal)
    assert v.member and v.mode == "exhaustive"


def test_seam_operator_preserves():
    p = _l1_params(InteractionSpec.power_law(1.5))
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(2))
    _, parts = build_transformed(p, bal, parts=True)
    V = -parts["T"]["LR"] + parts["W"]["LR"]
    assert operator_preserves(V, bal).member


def test_w0_bound_sampled_at_three():
    p = ModelParams(ell=3, g=0.3, interaction=InteractionSpec.power_law(1.5), n_max=1)
    bal = CompositeBasis.balanced(3, PhononBasisSpec.fock(1))
    WLR, W0 = seam_interaction(p, bal)
    v = operator_preserves(WLR - W0, bal, n_samples=60)
    assert v.member and v.mode == "sampled"
    # the minimal eigenvalue of a larger matrix cannot exceed that of its corner
    assert w0_value(p.interaction, 3) <= w0_value(p.interaction, 1)


def test_ergodicity_orthant_toys():
    H = np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, -1.0, 0.0]])
    assert ergodicity_check(H, cone="orthant").member
    assert not ergodicity_check(np.diag([1.0, 2.0]), cone="orthant").member


def test_reflection_ergodicity_at_one():
    p = _l1_params(InteractionSpec.power_law(1.5))
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(2))
    v = ergodicity_check(build_transformed(p, bal), bal, betas=(0.5, 2.0))
    assert v.member and v.mode == "exhaustive"


def test_positive_ground_section_toys():
    v, m, info = positive_ground_section(-np.eye(3))
    assert info["degeneracy"] == 3 and m >= -1e-10
    # degenerate pair, one of whose combinations is the positive vector (1,1,1)/sqrt 3
    u = np.ones(3) / np.sqrt(3)
    w = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    z = np.cross(u, w)
    H = np.outer(z, z)
    v, m, info = positive_ground_section(H, restarts=10)
    assert info["degeneracy"] == 2
    assert m > 0.5 / np.sqrt(3)
    assert np.allclose(np.sort(np.abs(v)), np.sort(np.abs(u)), atol=1e-4)


def test_ground_state_reflection_positive_at_three():
    p = ModelParams(ell=3, g=0.3, interaction=InteractionSpec.nearest(1.0), n_max=1)
    half = CompositeBasis.half_filled(3, PhononBasisSpec.fock(1))
    _, psi, _ = ground_state(build_hamiltonian(p, half))
    v = reflection_membership(psi, half, params=p, picture="original")
    assert v.member
    with pytest.raises(ValueError):
        reflection_membership(psi, half)


def test_trotter_domination():
    p = _l1_params(InteractionSpec.nearest(1.0))
    bal = CompositeBasis.balanced(1, PhononBasisSpec.fock(2))
    _, parts = build_transformed(p, bal, parts=True)
    K = sum(parts["K"].values())
    _, W0 = seam_interaction(p, bal)
    assert w0_value(p.interaction, 1) > 0
    gens = matrix_unit_generators(bal)
    member = lambda imgs: images_in_cone(imgs, bal)
    v = trotter_domination_check(K, W0, member, gens)
    assert v.member
    # K and W_0 act on different factors, so every Trotter product is exact
    assert v.details["trotter_rate"] is None
    assert max(v.details["trotter_errors"]) < 1e-12
    zero = trotter_domination_check(K, 0 * K, member, gens)
    assert zero.member and zero.details["trotter_rate"] is None


def test_trotter_domination_diagonal_orthant():
    A = np.diag([1.0, 2.0, 0.5])
    B = np.diag([0.3, 0.0, 0.7])

    def member(imgs):
        m = float(imgs.min())
        return ConeVerdict(m >= -1e-12, m > 0, m)

    v = trotter_domination_check(A, B, member, np.eye(3))
    assert v.member


def test_trotter_rate_for_noncommuting_pair():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((4, 4))
    A = A @ A.T
    B = np.abs(rng.standard_normal((4, 4)))

    def member(imgs):
        m = float(imgs.min())
        return ConeVerdict(m >= -1e-12, m > 0, m)

    v = trotter_domination_check(A, B, member, np.eye(4), t=0.5)
    assert v.details["trotter_rate"] == pytest.approx(-1.0, abs=0.2)
