"""Self-contained verification suite for the probability machinery.

Each check pairs a closed form against an independent oracle: exhaustive
enumeration for the vote distribution, seeded Monte Carlo through the real
encode/transmit operations for the expectation identities, and the physical
gain-threshold sampler against the outage formula.  All randomness is seeded,
so a given configuration always produces the same pass/fail table.
"""
from __future__ import annotations

import numpy as np

from .analysis import (
    correct_vote_probability,
    expected_wrong_count,
    markov_correct_vote_bound,
    one_step_descent_bound,
    per_coordinate_correct_probabilities,
    poisson_binomial_pmf,
    stochastic_sign_expected_wrong,
    three_worker_closed_form,
    wrong_aggregation_instance,
    wrong_sign_probabilities,
)
from .signs import (
    StochasticSignConfig,
    majority_vote,
    sign_quantize,
    stochastic_sign_encode,
)
from .wireless import ChannelModel, outage_probability, sample_rayleigh_outage

__all__ = ["enumerate_vote_distribution", "mc_expected_wrong", "run_property_checks"]


def enumerate_vote_distribution(wrong_probs) -> np.ndarray:
    """Exact pmf of the wrong-sign count by summing over all 2^M outcomes;
    independent of the convolution used by :func:`poisson_binomial_pmf`."""
    p = np.asarray(wrong_probs, dtype=np.float64)
    m = p.size
    if m > 20:
        raise ValueError("enumeration is exponential; use the convolution instead")
    masks = (np.arange(2**m)[:, None] >> np.arange(m)) & 1
    weights = np.prod(np.where(masks == 1, p, 1.0 - p), axis=1)
    counts = masks.sum(axis=1)
    pmf = np.zeros(m + 1)
    np.add.at(pmf, counts, weights)
    return pmf


def mc_expected_wrong(
    gradients, b: float, p_out: float, trials: int, rng: np.random.Generator
) -> float:
    """Monte-Carlo estimate of the expected wrong-sign count for one
    coordinate, through the real encoder.

    Trials are batched as coordinates of one long gradient (the encoder is
    coordinate-independent), and each trial gets its own packet-flip draw,
    which on a one-coordinate packet is exactly the transmission channel.
    """
    g = np.asarray(gradients, dtype=np.float64)
    true_sign = 1 if np.mean(g) >= 0.0 else -1
    cfg = StochasticSignConfig(b, p_out)
    wrong = 0.0
    for gm in g:
        sent = stochastic_sign_encode(np.full(trials, gm), cfg, rng)
        flips = rng.random(trials) < p_out
        received = np.where(flips, -sent, sent)
        wrong += float(np.mean(received != true_sign))
    return wrong


def _check_dp_vs_enumeration(rng) -> tuple[bool, str]:
    worst = 0.0
    for m in range(1, 13):
        probs = rng.random(m)
        dp = poisson_binomial_pmf(probs)
        exact = enumerate_vote_distribution(probs)
        worst = max(worst, float(np.max(np.abs(dp - exact))))
        half = correct_vote_probability(probs)
        ref = float(np.sum(exact[: (m + 1) // 2]))
        worst = max(worst, abs(half - ref))
    return worst <= 1e-12, f"max abs pmf error {worst:.2e}"


def _check_markov_bound(rng) -> tuple[bool, str]:
    worst = -np.inf
    for _ in range(1000):
        probs = rng.random(rng.integers(1, 13))
        gap = markov_correct_vote_bound(probs) - correct_vote_probability(probs)
        worst = max(worst, float(gap))
    return worst <= 1e-12, f"max (bound - exact) {worst:.2e}"


def _check_three_worker_closed_form(_) -> tuple[bool, str]:
    worst = 0.0
    for b in (0.02, 0.1, 0.25):
        probs = np.array([0.5 + b, 0.5 + b, 0.5 - 3.0 * b])
        worst = max(
            worst, abs(three_worker_closed_form(b) - correct_vote_probability(probs))
        )
    return worst <= 1e-12, f"max closed-form error {worst:.2e}"


def _check_expected_wrong_mc(rng, trials: int, instances: int) -> tuple[bool, str]:
    cases = [(np.array([-1.0, -1.0, 3.0]), 0.1, 0.1)]
    for _ in range(instances):
        m = int(rng.integers(2, 11))
        g = rng.normal(0.0, 1.0, m)
        p_out = float(rng.uniform(0.0, 0.3))
        b = float(rng.uniform(0.2, 0.9) * (0.5 - p_out) / np.max(np.abs(g)))
        cases.append((g, b, p_out))
    worst_z = 0.0
    for g, b, p_out in cases:
        probs, analytic = stochastic_sign_expected_wrong(g, b, p_out)
        sigma = float(np.sqrt(np.sum(probs * (1.0 - probs)) / trials))
        mc = mc_expected_wrong(g, b, p_out, trials, rng)
        worst_z = max(worst_z, abs(mc - analytic) / max(sigma, 1e-300))
    return worst_z <= 3.0, f"worst |z| {worst_z:.2f} over {len(cases)} instances"


def _check_descent_bound(rng, trials: int) -> tuple[bool, str]:
    d, m, eta = 20, 10, 0.1
    w = rng.normal(0.0, 1.0, d)
    grad = w.copy()
    f_now = 0.5 * float(w @ w)
    details = []
    ok = True
    for p_out in (0.0, 0.1, 0.3):
        b = 0.8 * (0.5 - p_out) / float(np.max(np.abs(grad)))
        cfg = StochasticSignConfig(b, p_out)
        wrong = np.tile(0.5 - b * np.abs(grad), (m, 1))
        correct = per_coordinate_correct_probabilities(wrong)
        bound = one_step_descent_bound(f_now, grad, eta, 1.0, correct)
        values = np.empty(trials)
        for t in range(trials):
            packets = []
            for _ in range(m):
                sent = stochastic_sign_encode(grad, cfg, rng)
                flip = rng.random() < p_out
                packets.append(-sent if flip else sent)
            w_next = w - eta * majority_vote(packets).astype(np.float64)
            values[t] = 0.5 * float(w_next @ w_next)
        sigma = float(values.std(ddof=1) / np.sqrt(trials))
        z = (float(values.mean()) - bound) / sigma
        details.append(f"p_out={p_out}: z={z:.2f}")
        ok = ok and z <= 3.0
    return ok, "; ".join(details)


def _check_rayleigh_sampler(rng, trials: int) -> tuple[bool, str]:
    ch = ChannelModel(N0=1e-8, B=15e3, packet_bits=7850)
    worst_z = 0.0
    for _ in range(10):
        rate = float(rng.uniform(0.5, 12.0))
        power = float(rng.uniform(0.05, 1.0))
        p = outage_probability(rate, power, ch)
        draws = sample_rayleigh_outage(rate, power, ch, rng, size=trials)
        sigma = max(np.sqrt(p * (1.0 - p) / trials), 1e-300)
        worst_z = max(worst_z, abs(float(np.mean(draws)) - p) / sigma)
    return worst_z <= 3.0, f"worst |z| {worst_z:.2f} over 10 (rate, power) pairs"


def _check_encode_channel_composition(rng, trials: int) -> tuple[bool, str]:
    d = 50
    p_out = 0.2
    g = rng.normal(0.0, 1.0, d)
    b = 0.7 * (0.5 - p_out) / float(np.max(np.abs(g)))
    cfg = StochasticSignConfig(b, p_out)
    true = sign_quantize(g)
    wrong_counts = np.zeros(d)
    for _ in range(trials):
        sent = stochastic_sign_encode(g, cfg, rng)
        if rng.random() < p_out:
            sent = -sent
        wrong_counts += sent != true
    expected = 0.5 - b * np.abs(g)
    sigma = np.sqrt(expected * (1.0 - expected) / trials)
    worst_z = float(np.max(np.abs(wrong_counts / trials - expected) / sigma))
    return worst_z <= 3.5, f"worst coordinate |z| {worst_z:.2f} at {trials} trials"


def _check_invariances(rng) -> tuple[bool, str]:
    g = rng.normal(0.0, 1.0, 8)
    b = 0.3 / float(np.max(np.abs(g)))
    _, ez = stochastic_sign_expected_wrong(g, b)
    _, ez_perm = stochastic_sign_expected_wrong(g[rng.permutation(8)], b)
    _, ez_neg = stochastic_sign_expected_wrong(-g, b)
    if not (abs(ez - ez_perm) <= 1e-12 and abs(ez - ez_neg) <= 1e-12):
        return False, "expected wrong count not permutation/negation invariant"
    inst = wrong_aggregation_instance(3)
    if inst["vote_sign"] == inst["true_sign"]:
        return False, "three-worker instance failed to disagree"
    edge = wrong_aggregation_instance(2)
    if edge["vote_sign"] != edge["true_sign"]:
        return False, "two-worker tie edge should agree under the +1 rule"
    probs = wrong_sign_probabilities(np.array([-1.0, -1.0, 3.0]), 0.1)
    if abs(expected_wrong_count(probs) - 1.4) > 1e-12:
        return False, "reference instance expectation != 1.4"
    return True, "permutation/negation invariance and reference instances hold"


def _check_large_vote_majority(rng) -> tuple[bool, str]:
    """With many workers and a clear aggregate signal the exact correct-vote
    probability exceeds one half."""
    worst = np.inf
    for m in (20, 25, 30):
        for _ in range(5):
            g = rng.normal(0.5, 0.6, m)
            margin = float(rng.uniform(0.75, 2.0))
            b = margin / (m * abs(float(np.mean(g))))
            if b * float(np.max(np.abs(g))) >= 0.5:
                b = 0.45 / float(np.max(np.abs(g)))
            probs = wrong_sign_probabilities(g, b)
            worst = min(worst, correct_vote_probability(probs))
    return worst > 0.5, f"min correct-vote probability {worst:.4f}"


def run_property_checks(seed: int, trials: int, instances: int) -> list[dict]:
    """Run every check and return one row per property."""
    rows = []
    jobs = [
        ("dp_matches_enumeration", lambda r: _check_dp_vs_enumeration(r)),
        ("markov_bound_below_exact", lambda r: _check_markov_bound(r)),
        ("three_worker_closed_form", _check_three_worker_closed_form),
        (
            "expected_wrong_count_mc",
            lambda r: _check_expected_wrong_mc(r, trials, instances),
        ),
        (
            "descent_bound_quadratic",
            lambda r: _check_descent_bound(r, max(1000, trials // 10)),
        ),
        ("rayleigh_sampler_matches_formula", lambda r: _check_rayleigh_sampler(r, trials)),
        (
            "encode_channel_composition",
            lambda r: _check_encode_channel_composition(r, min(trials, 20_000)),
        ),
        ("instance_invariances", _check_invariances),
        ("large_vote_clear_signal", _check_large_vote_majority),
    ]
    for idx, (name, fn) in enumerate(jobs):
        rng = np.random.default_rng([int(seed), 0xA11, idx])
        passed, detail = fn(rng)
        rows.append({"name": name, "passed": bool(passed), "detail": detail})
    return rows
