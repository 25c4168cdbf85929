"""Reliability analysis of majority-vote sign aggregation.

Probability inputs are taken as raw floats (finite, any value), because
several closed-form identities here remain valid as polynomial identities
even when a formal "probability" leaves [0, 1]; callers that need honest
probabilities validate ranges themselves.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "wrong_sign_probability",
    "expected_wrong_count",
    "poisson_binomial_pmf",
    "correct_vote_probability",
    "per_coordinate_correct_probabilities",
    "markov_correct_vote_bound",
    "wrong_sign_probabilities",
    "stochastic_sign_expected_wrong",
    "three_worker_closed_form",
    "wrong_aggregation_instance",
    "one_step_descent_bound",
]


def wrong_sign_probability(p_agree: float, p_out: float) -> float:
    """Probability the received sign is wrong when the transmitted sign is
    correct with probability ``p_agree`` and the channel inverts the packet
    with probability ``p_out``: p_agree * p_out + (1 - p_agree) * (1 - p_out).
    """
    return p_agree * p_out + (1.0 - p_agree) * (1.0 - p_out)


def expected_wrong_count(wrong_probs) -> float:
    """Expected number of workers delivering a wrong sign: the sum of the
    per-worker wrong-sign probabilities."""
    return float(np.sum(_as_finite_1d(wrong_probs, "wrong_probs")))


def _as_finite_1d(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def poisson_binomial_pmf(probs) -> np.ndarray:
    """Distribution of the number of successes among independent Bernoulli
    trials with per-trial probabilities ``probs``, by direct convolution.

    Returns an array of length M+1; entry k is P(exactly k successes).
    """
    probs = _as_finite_1d(probs, "probs")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for p in probs:
        pmf[1:] = pmf[1:] * (1.0 - p) + pmf[:-1] * p
        pmf[0] *= 1.0 - p
    return pmf


def correct_vote_probability(wrong_probs) -> float:
    """Probability that a strict majority of the M workers carries the
    correct sign, i.e. P(Z < M/2) for Z the wrong-sign count.

    Even splits count as incorrect, matching the tie-break convention being
    a coin toss the analysis does not credit.
    """
    wrong_probs = _as_finite_1d(wrong_probs, "wrong_probs")
    pmf = poisson_binomial_pmf(wrong_probs)
    m = wrong_probs.size
    return float(np.sum(pmf[: (m + 1) // 2]))


def per_coordinate_correct_probabilities(wrong_matrix) -> np.ndarray:
    """Column-wise :func:`correct_vote_probability` for an (M, d) matrix of
    per-worker, per-coordinate wrong-sign probabilities."""
    wrong_matrix = np.asarray(wrong_matrix, dtype=np.float64)
    if wrong_matrix.ndim != 2:
        raise ValueError("wrong_matrix must be 2-D (workers x coordinates)")
    return np.array(
        [correct_vote_probability(wrong_matrix[:, j]) for j in range(wrong_matrix.shape[1])]
    )


def markov_correct_vote_bound(wrong_probs) -> float:
    """Markov-inequality lower bound (M - 2 sum p_m) / M on the correct-vote
    probability; coincides with 1 - 2 E[Z] / M."""
    wrong_probs = _as_finite_1d(wrong_probs, "wrong_probs")
    m = wrong_probs.size
    return float((m - 2.0 * np.sum(wrong_probs)) / m)


def wrong_sign_probabilities(gradients, b: float) -> np.ndarray:
    """Per-worker probability of carrying the wrong sign for one coordinate
    under stochastic sign encoding: 1/2 - b * g_m * sign(mean g).

    Raw formula with no range clamping; values leave [0, 1] once
    b |g_m| > 1/2, which callers must treat as formal quantities only.
    """
    g = _as_finite_1d(gradients, "gradients")
    if b < 0.0:
        raise ValueError(f"b must be nonnegative, got {b}")
    true_sign = 1.0 if np.mean(g) >= 0.0 else -1.0
    return 0.5 - b * g * true_sign


def stochastic_sign_expected_wrong(
    gradients, b: float, p_out: float = 0.0
) -> tuple[np.ndarray, float]:
    """Per-worker wrong-sign probabilities and their sum E[Z] for one
    coordinate, validated against the encoder operating range.

    Requires b |g_m| <= 1/2 - p_out for every worker, the regime in which the
    stochastic encoder realizes these probabilities without clamping; the sum
    equals M/2 - b M |mean g| regardless of the channel outage level.
    """
    g = _as_finite_1d(gradients, "gradients")
    if not (0.0 <= p_out < 0.5):
        raise ValueError(f"p_out must be in [0, 0.5), got {p_out}")
    if b < 0.0:
        raise ValueError(f"b must be nonnegative, got {b}")
    limit = 0.5 - p_out
    if np.max(b * np.abs(g)) > limit + 1e-12:
        raise ValueError(
            f"b * |g_m| exceeds {limit}; encoder would clamp these coordinates"
        )
    probs = wrong_sign_probabilities(g, b)
    return probs, float(np.sum(probs))


def three_worker_closed_form(b: float) -> float:
    """Correct-vote probability for the three-worker instance with gradient
    values (-1, -1, 3): closed form 1/2 + b/2 - 6 b^3, valid for
    0 <= b <= 1/sqrt(12) (beyond that the vote is worse than a coin toss
    and the derivation's premises fail).
    """
    if not (0.0 <= b <= 1.0 / np.sqrt(12.0)):
        raise ValueError(f"b must be in [0, 1/sqrt(12)], got {b}")
    return 0.5 + 0.5 * b - 6.0 * b**3


def wrong_aggregation_instance(num_workers: int = 3) -> dict:
    """Instance where plain sign majority contradicts the true aggregate
    gradient: M-1 workers hold value -1 and one worker holds value M, so the
    mean is 1/M > 0 while the sign majority is negative for M >= 3.

    At M = 2 the vote ties and the +1 tie rule happens to agree with the
    true sign; that edge is reported, not an error.
    """
    if num_workers < 2:
        raise ValueError(f"need at least two workers, got {num_workers}")
    g = np.full(num_workers, -1.0)
    g[-1] = float(num_workers)
    signs = np.where(g >= 0.0, 1, -1)
    vote = 1 if int(np.sum(signs)) >= 0 else -1
    true_sign = 1 if float(np.mean(g)) >= 0.0 else -1
    return {
        "gradients": g,
        "worker_signs": signs.astype(np.int8),
        "vote_sign": vote,
        "true_sign": true_sign,
        "mean_gradient": float(np.mean(g)),
    }


def one_step_descent_bound(
    f_value: float, gradient, eta: float, smoothness: float, correct_probs
) -> float:
    """Upper bound on the expected objective after one sign-descent step.

    For an L-smooth objective with current value ``f_value`` and gradient
    ``gradient``, a step of size ``eta`` along the aggregated sign vector
    whose per-coordinate correct-sign probabilities are ``correct_probs``
    satisfies

        E[F(w+)] <= F(w) + eta * ||g||_1 + L * eta^2 * d / 2
                    - 2 * eta * sum_i |g_i| * P_i.
    """
    g = _as_finite_1d(gradient, "gradient")
    p = _as_finite_1d(correct_probs, "correct_probs")
    if p.size != g.size:
        raise ValueError("gradient and correct_probs dimensions differ")
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    if smoothness <= 0.0:
        raise ValueError(f"smoothness must be positive, got {smoothness}")
    d = g.size
    abs_g = np.abs(g)
    return float(
        f_value
        + eta * np.sum(abs_g)
        + 0.5 * smoothness * eta**2 * d
        - 2.0 * eta * np.sum(abs_g * p)
    )
