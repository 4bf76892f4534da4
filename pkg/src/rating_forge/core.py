"""Stage game, plans, report channel and rating-transition kernels.

The platform matches N users into server/client pairs each period (a uniform
random derangement).  A server with rating ``theta_s`` facing a client with
rating ``theta_c`` either complies with the publicly recommended plan or
deviates; the client's noisy report is compared against the recommended
quality and the server's binary rating is re-drawn from the update rule.

Everything in this module is a pure function of its arguments.  Exact
next-distribution laws under the fair plan require the joint law of client
types across users, which we obtain by enumerating derangements for small N
(``EXACT_MATCHING_LIMIT``) and by an independent-marginal approximation above
that size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Largest N for which fair-plan kernels enumerate all derangements exactly.
EXACT_MATCHING_LIMIT = 8

_PROB_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when model inputs violate a documented invariant."""


def _clamp_probability(p: float, what: str = "probability") -> float:
    """Clamp to [0,1] within 1e-12 of the boundary, error beyond."""
    if -_PROB_TOL <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + _PROB_TOL:
        return 1.0
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"{what} out of range: {p!r}")
    return p


@dataclass(frozen=True)
class GameParams:
    """Population size and stage-game constants.

    benefit/cost are the gift-giving payoffs (client gets ``benefit``, server
    pays ``cost`` for high quality); ``report_error`` is the probability a
    report is flipped; ``discount`` is the common discount factor.
    """

    n_users: int
    benefit: float
    cost: float
    report_error: float
    discount: float

    def __post_init__(self):
        if self.n_users < 3:
            raise ValidationError("n_users must be at least 3")
        if not 0.0 < self.cost < self.benefit:
            raise ValidationError("need 0 < cost < benefit")
        if not 0.0 <= self.report_error < 0.5:
            raise ValidationError("report_error must lie in [0, 0.5)")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError("discount must lie in [0, 1)")
        n, b, c = self.n_users, self.benefit, self.cost
        if (n - 2) / (n - 1) * b - c <= 0.0:
            raise ValidationError(
                "infeasible population: ((N-2)/(N-1))*benefit - cost must be positive"
            )


@dataclass(frozen=True)
class Plan:
    """A contingent service-quality rule: (client rating, server rating) -> {0,1}.

    ``quality`` is indexed by 2*client_rating + server_rating.
    """

    quality: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.quality) != 4 or any(q not in (0, 1) for q in self.quality):
            raise ValidationError("plan table must be four 0/1 entries")

    def __call__(self, client_rating: int, server_rating: int) -> int:
        return self.quality[2 * client_rating + server_rating]


ALTRUISTIC = Plan((1, 1, 1, 1))
#: serve a client iff its rating is at least the server's own rating
FAIR = Plan((1, 0, 1, 1))
SELFISH = Plan((0, 0, 0, 0))
#: unilateral deviations: skip rating-0 clients / skip rating-1 clients / skip everyone
DEV0 = Plan((0, 0, 1, 1))
DEV1 = Plan((1, 1, 0, 0))
DEV01 = SELFISH

PLAN_NAMES = {ALTRUISTIC: "a", FAIR: "f", SELFISH: "s"}


def all_plans() -> list[Plan]:
    """All 16 contingent plans."""
    return [Plan(q) for q in itertools.product((0, 1), repeat=4)]


@dataclass(frozen=True)
class RatingUpdateRule:
    """The four update probabilities (beta1_up, beta1_down, beta0_up, beta0_down).

    When the report is at least the recommended quality the server's next
    rating is 1 with probability ``beta<theta>_up``; otherwise it is 0 with
    probability ``beta<theta>_down``.
    """

    beta1_up: float
    beta1_down: float
    beta0_up: float
    beta0_down: float

    def __post_init__(self):
        for name in ("beta1_up", "beta1_down", "beta0_up", "beta0_down"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0,1], got {v!r}")

    def beta_up(self, theta: int) -> float:
        return self.beta1_up if theta == 1 else self.beta0_up

    def beta_down(self, theta: int) -> float:
        return self.beta1_down if theta == 1 else self.beta0_down

    def comply_up(self, theta: int, eps: float) -> float:
        """x_theta: up-probability when recommended quality 1 is delivered."""
        return _clamp_probability(
            (1 - eps) * self.beta_up(theta) + eps * (1 - self.beta_down(theta))
        )

    def shirk_up(self, theta: int, eps: float) -> float:
        """Up-probability when quality 0 is delivered against recommended 1."""
        return _clamp_probability(
            (1 - eps) * (1 - self.beta_down(theta)) + eps * self.beta_up(theta)
        )

    def fair_up(self, s1: int, n: int, eps: float) -> float:
        """Marginal up-probability of a rating-1 user complying with the fair plan.

        Mixes the comply branch (rating-1 client) and the automatic branch
        (rating-0 client, recommended quality 0) by the client-type odds.
        """
        p1 = (s1 - 1) / (n - 1)
        return _clamp_probability(
            p1 * self.comply_up(1, eps) + (1 - p1) * self.beta1_up
        )


@dataclass(frozen=True)
class RatingDistribution:
    """Counts of users at rating 0 and rating 1."""

    s0: int
    s1: int

    def __post_init__(self):
        if self.s0 < 0 or self.s1 < 0:
            raise ValidationError("rating counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.s0 + self.s1


@dataclass(frozen=True)
class RatingProfile:
    """Per-user ratings; order is the platform's user index."""

    ratings: tuple[int, ...]

    def __post_init__(self):
        if any(r not in (0, 1) for r in self.ratings):
            raise ValidationError("ratings must be 0/1")

    def distribution(self) -> RatingDistribution:
        s1 = sum(self.ratings)
        return RatingDistribution(len(self.ratings) - s1, s1)


def _check_distribution(s: RatingDistribution, params: GameParams) -> None:
    if s.n != params.n_users:
        raise ValidationError(
            f"distribution {s} inconsistent with n_users={params.n_users}"
        )


def up_probability(
    server_rating: int,
    client_rating: int,
    recommended: Plan,
    own_plan: Plan,
    rule: RatingUpdateRule,
    eps: float,
) -> float:
    """Next-rating-1 probability of one server against one known client type.

    The report is compared to the recommended quality, so a recommended
    quality of 0 counts as compliance regardless of what was delivered.
    """
    rec_q = recommended(client_rating, server_rating)
    own_q = own_plan(client_rating, server_rating)
    if rec_q == 0:
        return rule.beta_up(server_rating)
    if own_q >= rec_q:
        return rule.comply_up(server_rating, eps)
    return rule.shirk_up(server_rating, eps)


def stage_payoff(
    theta: int,
    s: RatingDistribution,
    recommended: Plan,
    own_plan: Plan,
    params: GameParams,
) -> float:
    """One-period expected payoff of a rating-``theta`` user.

    Everyone else follows ``recommended``; this user serves according to
    ``own_plan``.  Both the user's server and the client it serves are
    uniform over the other N-1 users.
    """
    _check_distribution(s, params)
    if theta not in (0, 1):
        raise ValidationError("theta must be 0 or 1")
    if (theta == 1 and s.s1 < 1) or (theta == 0 and s.s0 < 1):
        raise ValidationError(f"no rating-{theta} user exists in {s}")
    n = params.n_users
    p_partner_1 = (s.s1 - (1 if theta == 1 else 0)) / (n - 1)
    benefit = params.benefit * (
        p_partner_1 * recommended(theta, 1) + (1 - p_partner_1) * recommended(theta, 0)
    )
    cost = params.cost * (
        p_partner_1 * own_plan(1, theta) + (1 - p_partner_1) * own_plan(0, theta)
    )
    return benefit - cost


def compliance_up_probability(
    theta: int,
    plan: Plan,
    s: RatingDistribution,
    rule: RatingUpdateRule,
    eps: float,
) -> float:
    """Up-probability of a rating-``theta`` user complying with ``plan``.

    Marginalizes :func:`up_probability` over the user's client type.
    """
    return deviation_up_probability(theta, plan, plan, s, rule, eps)


def deviation_up_probability(
    theta: int,
    recommended: Plan,
    own_plan: Plan,
    s: RatingDistribution,
    rule: RatingUpdateRule,
    eps: float,
) -> float:
    """Up-probability when the user unilaterally serves via ``own_plan``."""
    n = s.n
    p1 = (s.s1 - (1 if theta == 1 else 0)) / (n - 1)
    up1 = up_probability(theta, 1, recommended, own_plan, rule, eps)
    up0 = up_probability(theta, 0, recommended, own_plan, rule, eps)
    return _clamp_probability(p1 * up1 + (1 - p1) * up0)


def sample_report(quality: int, eps: float, rng: np.random.Generator) -> int:
    """Report the delivered quality, flipped with probability ``eps``."""
    if rng.random() < eps:
        return 1 - quality
    return quality


# ---------------------------------------------------------------------------
# Matching combinatorics
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _derangements(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(
        p
        for p in itertools.permutations(range(n))
        if all(p[i] != i for i in range(n))
    )


@lru_cache(maxsize=None)
def client_type_counts_pmf(n: int, s1: int, focal_rating: int | None):
    """Joint law of client-type counts under a uniform derangement.

    Users 0..s1-1 hold rating 1.  Returns a dict mapping
    ``(t0, k1, k0) -> probability`` where ``t0`` is the focal user's client
    rating (0 when there is no focal user), ``k1`` counts non-focal rating-1
    users whose client has rating 1, and ``k0`` the same among rating-0
    users.  The focal user is the first rating-1 user or the last rating-0
    user depending on ``focal_rating``.

    Exact by enumeration for ``n <= EXACT_MATCHING_LIMIT``; caller is
    responsible for using the independent approximation beyond.
    """
    if n > EXACT_MATCHING_LIMIT:
        raise ValidationError(f"exact matching law limited to N <= {EXACT_MATCHING_LIMIT}")
    if focal_rating == 1 and s1 < 1:
        raise ValidationError("no rating-1 user to focus on")
    if focal_rating == 0 and s1 > n - 1:
        raise ValidationError("no rating-0 user to focus on")
    focal = None
    if focal_rating == 1:
        focal = 0
    elif focal_rating == 0:
        focal = n - 1
    counts: dict[tuple[int, int, int], int] = {}
    # The law of (user -> its client) equals the law of a uniform derangement.
    for m in _derangements(n):
        t0 = 0
        k1 = 0
        k0 = 0
        for j in range(n):
            client_is_1 = 1 if m[j] < s1 else 0
            if j == focal:
                t0 = client_is_1
            elif j < s1:
                k1 += client_is_1
            else:
                k0 += client_is_1
        key = (t0, k1, k0)
        counts[key] = counts.get(key, 0) + 1
    total = len(_derangements(n))
    return {k: v / total for k, v in counts.items()}


def _binom_pmf(k: int, p: float) -> np.ndarray:
    """pmf of Binomial(k, p) as a length-(k+1) vector."""
    if k == 0:
        return np.ones(1)
    j = np.arange(k + 1)
    from scipy.stats import binom

    return binom.pmf(j, k, p)


def _convolve_counts(*pmfs: np.ndarray) -> np.ndarray:
    out = np.ones(1)
    for p in pmfs:
        out = np.convolve(out, p)
    return out


def _group_up_pmf(
    k_type1: int, n_group: int, p_client1: float, p_client0: float
) -> np.ndarray:
    """Law of up-moves in a group of ``n_group`` users, ``k_type1`` of whom
    face rating-1 clients (up-prob ``p_client1``), the rest rating-0 clients."""
    return _convolve_counts(
        _binom_pmf(k_type1, p_client1), _binom_pmf(n_group - k_type1, p_client0)
    )


def _plan_needs_matching_law(recommended: Plan, own: Plan) -> bool:
    """Whether any server's up-probability depends on its client's rating."""
    for theta in (0, 1):
        if (
            up_probability(theta, 1, recommended, own, _UNIT_RULE, 0.25)
            != up_probability(theta, 0, recommended, own, _UNIT_RULE, 0.25)
        ):
            return True
    return False


# A generic-position rule: distinct branch values for dependence detection.
_UNIT_RULE = RatingUpdateRule(0.81, 0.77, 0.43, 0.91)


def joint_transition(
    theta: int,
    s: RatingDistribution,
    recommended: Plan,
    own_plan: Plan,
    rule: RatingUpdateRule,
    eps: float,
    exact_limit: int = EXACT_MATCHING_LIMIT,
) -> np.ndarray:
    """Joint law of (next own rating, next count of rating-1 users).

    One focal user with rating ``theta`` plays ``own_plan``; the other N-1
    follow ``recommended``; every rating update compares reports against
    ``recommended``.  Returns an array ``q[theta_next, s1_next]`` of shape
    (2, N+1).

    Exact for ``N <= exact_limit`` (derangement enumeration); otherwise each
    user's client type is drawn independently with its exact marginal.
    """
    _check_probe(theta, s)
    n = s.n
    s1 = s.s1
    n1o = s1 - (1 if theta == 1 else 0)  # rating-1 users besides the focal
    n0o = n - s1 - (1 if theta == 0 else 0)

    u = {
        (ts, tc): up_probability(ts, tc, recommended, recommended, rule, eps)
        for ts in (0, 1)
        for tc in (0, 1)
    }
    p_focal = {
        tc: up_probability(theta, tc, recommended, own_plan, rule, eps) for tc in (0, 1)
    }

    out = np.zeros((2, n + 1))
    if n <= exact_limit:
        pmf = client_type_counts_pmf(n, s1, theta)
        items = pmf.items()
        for (t0, k1, k0), w in items:
            others = _convolve_counts(
                _group_up_pmf(k1, n1o, u[(1, 1)], u[(1, 0)]),
                _group_up_pmf(k0, n0o, u[(0, 1)], u[(0, 0)]),
            )
            p0 = p_focal[t0]
            out[1, 1 : 1 + len(others)] += w * p0 * others
            out[0, : len(others)] += w * (1 - p0) * others
    else:
        q1 = (s1 - 1) / (n - 1)  # client-1 odds for a rating-1 server
        q0 = s1 / (n - 1)
        pbar1 = q1 * u[(1, 1)] + (1 - q1) * u[(1, 0)]
        pbar0 = q0 * u[(0, 1)] + (1 - q0) * u[(0, 0)]
        others = _convolve_counts(_binom_pmf(n1o, pbar1), _binom_pmf(n0o, pbar0))
        pf = (s1 - (1 if theta == 1 else 0)) / (n - 1)
        p0 = pf * p_focal[1] + (1 - pf) * p_focal[0]
        out[1, 1 : 1 + len(others)] += p0 * others
        out[0, : len(others)] += (1 - p0) * others
    return out


def _check_probe(theta: int, s: RatingDistribution) -> None:
    if theta not in (0, 1):
        raise ValidationError("theta must be 0 or 1")
    if theta == 1 and s.s1 < 1:
        raise ValidationError(f"no rating-1 user in {s}")
    if theta == 0 and s.s0 < 1:
        raise ValidationError(f"no rating-0 user in {s}")


def distribution_transition(
    s: RatingDistribution,
    plan: Plan,
    rule: RatingUpdateRule,
    eps: float,
    exact_limit: int = EXACT_MATCHING_LIMIT,
) -> dict[RatingDistribution, float]:
    """Exact one-period law of the rating distribution when all comply.

    Under the altruistic and selfish plans per-user updates are independent
    of the matching, so the law is a convolution of two binomials; under the
    fair plan rating-1 users' updates depend on their client's rating and the
    law is computed from the derangement statistics (or the independent
    approximation above ``exact_limit``).
    """
    if plan not in (ALTRUISTIC, FAIR, SELFISH):
        raise ValidationError("distribution_transition supports plans a/f/s only")
    arr = distribution_transition_array(s, plan, rule, eps, exact_limit)
    n = s.n
    return {
        RatingDistribution(n - s1p, s1p): float(arr[s1p])
        for s1p in range(n + 1)
        if arr[s1p] > 0.0
    }


def distribution_transition_array(
    s: RatingDistribution,
    plan: Plan,
    rule: RatingUpdateRule,
    eps: float,
    exact_limit: int = EXACT_MATCHING_LIMIT,
) -> np.ndarray:
    """Like :func:`distribution_transition` but a dense length-(N+1) vector."""
    n = s.n
    s1 = s.s1
    u = {
        (ts, tc): up_probability(ts, tc, plan, plan, rule, eps)
        for ts in (0, 1)
        for tc in (0, 1)
    }
    out = np.zeros(n + 1)
    needs_matching = u[(1, 1)] != u[(1, 0)] or u[(0, 1)] != u[(0, 0)]
    if needs_matching and s1 not in (0, n) and n <= exact_limit:
        pmf = client_type_counts_pmf(n, s1, None)
        for (_, k1, k0), w in pmf.items():
            dist = _convolve_counts(
                _group_up_pmf(k1, s1, u[(1, 1)], u[(1, 0)]),
                _group_up_pmf(k0, n - s1, u[(0, 1)], u[(0, 0)]),
            )
            out[: len(dist)] += w * dist
    else:
        q1 = (s1 - 1) / (n - 1) if s1 >= 1 else 0.0
        q0 = s1 / (n - 1)
        pbar1 = q1 * u[(1, 1)] + (1 - q1) * u[(1, 0)]
        pbar0 = q0 * u[(0, 1)] + (1 - q0) * u[(0, 0)]
        dist = _convolve_counts(_binom_pmf(s1, pbar1), _binom_pmf(n - s1, pbar0))
        out[: len(dist)] += dist
    return out
