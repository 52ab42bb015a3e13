import itertools
import math

import numpy as np
import numpy.testing as npt
import pytest

from trimod import tensor as tt
from trimod.crf import EmissionHead, LinearChainCRF, bio2_transition_allowed
from trimod.data import LABELS, is_valid_bio2


# ---------------------------------------------------------------------------
# Brute-force oracle: enumerate every label sequence explicitly.
# ---------------------------------------------------------------------------


def enumerate_paths(p, t_eff, start, end):
    """All label sequences (lexicographic order) with their path scores."""
    n, num_labels = p.shape
    seqs = np.array(list(itertools.product(range(num_labels), repeat=n)), dtype=int)
    scores = t_eff[start, seqs[:, 0]] + t_eff[seqs[:, -1], end]
    for i in range(n):
        scores = scores + p[i, seqs[:, i]]
        if i > 0:
            scores = scores + t_eff[seqs[:, i - 1], seqs[:, i]]
    return seqs, scores


def enum_log_partition(scores):
    m = scores.max()
    return m + math.log(np.exp(scores - m).sum())


def free_crf(num_labels, seed=0):
    """Unconstrained CRF over an artificial label set of the given size."""
    labels = tuple(f"L{i}" for i in range(num_labels))
    return LinearChainCRF(np.random.default_rng(seed), labels=labels, constrain_bio2=False)


def random_instance(crf, n, rng, spread=2.0):
    p = tt.Tensor(rng.uniform(-spread, spread, (n, crf.num_labels)))
    crf.transitions.data[:] = rng.uniform(-spread, spread, crf.transitions.shape)
    with tt.no_grad():
        t_eff = crf.effective_transitions().data
    return p, t_eff


class TestPathScore:
    def test_single_token_zero_transitions(self):
        crf = free_crf(2)
        crf.transitions.data[:] = 0.0
        p = tt.Tensor([[2.0, -1.0]])
        assert crf.path_score(p, [0]).item() == 2.0
        assert crf.path_score(p, [1]).item() == -1.0

    def test_two_token_hand_sum(self):
        crf = free_crf(2)
        crf.transitions.data[:] = 0.0
        # START=2, END=3 for a 2-label CRF.
        crf.transitions.data[2, 0] = 0.5   # START -> 0
        crf.transitions.data[0, 1] = -0.25  # 0 -> 1
        crf.transitions.data[1, 3] = 0.125  # 1 -> END
        p = tt.Tensor([[1.0, 2.0], [3.0, 4.0]])
        # 0.5 + (-0.25) + 0.125 + P[0,0] + P[1,1] = 0.375 + 1 + 4
        assert crf.path_score(p, [0, 1]).item() == pytest.approx(5.375, rel=1e-12)

    def test_constant_added_to_p_raises_by_n_c(self):
        crf = free_crf(3, seed=4)
        rng = np.random.default_rng(8)
        p, _ = random_instance(crf, 4, rng)
        labels = [1, 0, 2, 2]
        base = crf.path_score(p, labels).item()
        shifted = crf.path_score(tt.Tensor(p.data + 0.7), labels).item()
        assert shifted == pytest.approx(base + 4 * 0.7, rel=1e-10)

    def test_length_mismatch(self):
        crf = free_crf(2)
        with pytest.raises(ValueError):
            crf.path_score(tt.Tensor([[0.0, 0.0]]), [0, 1])


class TestLogPartition:
    def test_uniform_scores_give_n_log_l(self):
        crf = free_crf(9)
        crf.transitions.data[:] = 0.0
        for n in (1, 2, 5):
            p = tt.Tensor(np.zeros((n, 9)))
            assert crf.log_partition(p).item() == pytest.approx(n * math.log(9), rel=1e-12)

    def test_matches_enumeration(self):
        crf = free_crf(9, seed=1)
        rng = np.random.default_rng(11)
        for n in (1, 2, 3, 4):
            p, t_eff = random_instance(crf, n, rng)
            _, scores = enumerate_paths(p.data, t_eff, crf.start, crf.end)
            expected = enum_log_partition(scores)
            assert crf.log_partition(p).item() == pytest.approx(expected, rel=1e-10)

    def test_dominates_any_single_path(self):
        crf = free_crf(5, seed=2)
        rng = np.random.default_rng(3)
        p, _ = random_instance(crf, 3, rng)
        logz = crf.log_partition(p).item()
        for labels in itertools.product(range(5), repeat=3):
            assert logz >= crf.path_score(p, list(labels)).item()


class TestNllLoss:
    def test_uniform_scores_loss_is_n_log_l(self):
        crf = free_crf(9)
        crf.transitions.data[:] = 0.0
        p = tt.Tensor(np.zeros((3, 9)))
        assert crf.nll_loss(p, [0, 4, 8]).item() == pytest.approx(3 * math.log(9), rel=1e-12)

    def test_positive_for_finite_scores(self):
        crf = free_crf(4, seed=5)
        rng = np.random.default_rng(7)
        for _ in range(10):
            p, _ = random_instance(crf, 3, rng)
            labels = list(rng.integers(0, 4, 3))
            assert crf.nll_loss(p, labels).item() > 0.0

    def test_grad_check_wrt_p_and_t(self):
        crf = free_crf(4, seed=9)
        rng = np.random.default_rng(13)
        p = tt.Parameter(rng.uniform(-1, 1, (3, 4)), "p")
        crf.transitions.data[:] = rng.uniform(-1, 1, crf.transitions.shape)
        err = tt.grad_check(lambda: crf.nll_loss(p, [2, 0, 1]), [p, crf.transitions])
        assert err < 1e-4

    def test_full_label_set_grad_check(self):
        crf = LinearChainCRF(np.random.default_rng(0), constrain_bio2=True)
        rng = np.random.default_rng(1)
        p = tt.Parameter(rng.uniform(-1, 1, (3, 9)), "p")
        gold = [LABELS.index("B-PER"), LABELS.index("I-PER"), LABELS.index("O")]
        err = tt.grad_check(lambda: crf.nll_loss(p, gold), [p, crf.transitions])
        assert err < 1e-4

    def test_pinned_transitions_get_no_gradient(self):
        crf = LinearChainCRF(np.random.default_rng(0), constrain_bio2=True)
        p = tt.Parameter(np.random.default_rng(2).uniform(-1, 1, (2, 9)), "p")
        crf.transitions.zero_grad()
        tt.backward(crf.nll_loss(p, [0, 0]))
        grad = crf.transitions.grad
        # Into START and out of END are pinned; so is O -> I-PER under BIO2.
        assert grad[:, crf.start].sum() == 0.0
        assert grad[crf.end, :].sum() == 0.0
        assert grad[LABELS.index("O"), LABELS.index("I-PER")] == 0.0
        assert np.abs(grad).sum() > 0.0


class TestSequenceProb:
    def test_probabilities_sum_to_one(self):
        crf = free_crf(4, seed=3)
        rng = np.random.default_rng(5)
        for n in (1, 2, 3):
            p, _ = random_instance(crf, n, rng)
            total = sum(
                crf.sequence_prob(p, list(labels)).item()
                for labels in itertools.product(range(4), repeat=n)
            )
            assert total == pytest.approx(1.0, rel=1e-10)

    def test_uniform_scores_uniform_probs(self):
        crf = free_crf(3)
        crf.transitions.data[:] = 0.0
        p = tt.Tensor(np.zeros((2, 3)))
        assert crf.sequence_prob(p, [1, 2]).item() == pytest.approx(3.0 ** -2, rel=1e-12)

    def test_viterbi_sequence_has_max_probability(self):
        crf = free_crf(4, seed=6)
        rng = np.random.default_rng(9)
        p, _ = random_instance(crf, 3, rng)
        decoded, _ = crf.viterbi_decode(p)
        best_prob = crf.sequence_prob(p, decoded).item()
        for labels in itertools.product(range(4), repeat=3):
            assert best_prob >= crf.sequence_prob(p, list(labels)).item() - 1e-12


class TestViterbi:
    def test_single_token(self):
        crf = free_crf(3)
        crf.transitions.data[:] = 0.0
        path, score = crf.viterbi_decode(tt.Tensor([[1.0, 5.0, -2.0]]))
        assert path == [1]
        assert score == pytest.approx(5.0)

    def test_matches_enumeration_argmax(self):
        crf = free_crf(9, seed=8)
        rng = np.random.default_rng(21)
        for n in (1, 2, 3, 4):
            p, t_eff = random_instance(crf, n, rng)
            seqs, scores = enumerate_paths(p.data, t_eff, crf.start, crf.end)
            best = int(np.argmax(scores))
            path, score = crf.viterbi_decode(p)
            assert path == list(seqs[best])
            assert score == pytest.approx(scores[best], rel=1e-12)

    def test_bio2_constraints_yield_wellformed_output(self):
        crf = LinearChainCRF(np.random.default_rng(0), constrain_bio2=True)
        rng = np.random.default_rng(33)
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            p = rng.uniform(-3, 3, (n, 9))
            crf.transitions.data[:] = rng.uniform(-3, 3, crf.transitions.shape)
            path, _ = crf.viterbi_decode(p)
            assert is_valid_bio2([LABELS[i] for i in path])

    def test_unconstrained_can_be_illformed(self):
        crf = LinearChainCRF(np.random.default_rng(0), constrain_bio2=False)
        p = np.full((2, 9), -5.0)
        p[0, LABELS.index("O")] = 5.0
        p[1, LABELS.index("I-PER")] = 5.0
        path, _ = crf.viterbi_decode(p)
        assert not is_valid_bio2([LABELS[i] for i in path])


class TestMarginals:
    def test_logz_gradient_is_marginals(self):
        crf = free_crf(4, seed=12)
        rng = np.random.default_rng(14)
        p = tt.Parameter(rng.uniform(-1.5, 1.5, (3, 4)), "p")
        crf.transitions.data[:] = rng.uniform(-1.5, 1.5, crf.transitions.shape)
        p.zero_grad()
        tt.backward(crf.log_partition(p))

        with tt.no_grad():
            t_eff = crf.effective_transitions().data
        seqs, scores = enumerate_paths(p.data, t_eff, crf.start, crf.end)
        probs = np.exp(scores - enum_log_partition(scores))
        marginals = np.zeros((3, 4))
        for seq, prob in zip(seqs, probs):
            for i, y in enumerate(seq):
                marginals[i, y] += prob

        npt.assert_allclose(p.grad, marginals, rtol=1e-9)
        assert ((0.0 <= p.grad) & (p.grad <= 1.0)).all()
        npt.assert_allclose(p.grad.sum(axis=1), np.ones(3), rtol=1e-9)


class TestShiftInvariance:
    def test_adding_constant_to_emission_row_preserves_probs(self):
        crf = free_crf(3, seed=15)
        rng = np.random.default_rng(16)
        p, _ = random_instance(crf, 3, rng)
        labels = [2, 0, 1]
        base = crf.sequence_prob(p, labels).item()
        shifted = p.data.copy()
        shifted[1, :] += 3.7
        assert crf.sequence_prob(tt.Tensor(shifted), labels).item() == pytest.approx(
            base, rel=1e-9
        )

    def test_adding_constant_to_all_transitions_preserves_probs(self):
        # Every length-n path uses exactly n+1 transitions.
        crf = free_crf(3, seed=17)
        rng = np.random.default_rng(18)
        p, _ = random_instance(crf, 2, rng)
        labels = [1, 1]
        base = crf.sequence_prob(p, labels).item()
        crf.transitions.data += 1.3
        assert crf.sequence_prob(p, labels).item() == pytest.approx(base, rel=1e-9)


class TestEmissionHead:
    def test_zero_weights_zero_scores(self):
        head = EmissionHead(6, np.random.default_rng(0))
        head.weight.data[:] = 0.0
        head.bias.data[:] = 0.0
        p = head.emissions([tt.Tensor(np.ones(6)), tt.Tensor(np.zeros(6))])
        npt.assert_array_equal(p.data, np.zeros((2, 9)))

    def test_shape_n_by_9(self):
        head = EmissionHead(12, np.random.default_rng(1))
        vecs = [tt.Tensor(v) for v in np.random.default_rng(2).uniform(-1, 1, (5, 12))]
        assert head.emissions(vecs).shape == (5, 9)

    def test_dimension_mismatch(self):
        head = EmissionHead(4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            head.emissions([tt.Tensor(np.zeros(5))])

    def test_grad_check(self):
        head = EmissionHead(5, np.random.default_rng(3))
        vecs = [tt.Tensor(v) for v in np.random.default_rng(4).uniform(-1, 1, (2, 5))]
        err = tt.grad_check(lambda: tt.tanh(head.emissions(vecs)).sum(), head.params())
        assert err < 1e-6


class TestBio2TransitionRule:
    def test_examples(self):
        assert bio2_transition_allowed("O", "B-PER")
        assert bio2_transition_allowed("B-PER", "I-PER")
        assert bio2_transition_allowed("I-LOC", "I-LOC")
        assert not bio2_transition_allowed("O", "I-PER")
        assert not bio2_transition_allowed("B-PER", "I-LOC")
        assert not bio2_transition_allowed("<end>", "O")
        assert not bio2_transition_allowed("O", "<start>")
        assert bio2_transition_allowed("<start>", "B-ORG")
        assert not bio2_transition_allowed("<start>", "I-ORG")

    def test_transition_matrix_size(self):
        crf = LinearChainCRF(np.random.default_rng(0))
        assert crf.transitions.shape == (11, 11)
