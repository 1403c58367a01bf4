"""Finite-state Markov erasure channels for a two-receiver broadcast setting.

A channel is a Markov chain over hidden or visible states together with a
per-state joint erasure law for the two receivers.  Erasure outcomes are
pairs (z1, z2) with z_j = 1 meaning the packet was erased at receiver j.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Fixed wire order for joint erasure outcomes; index = 2*z1 + z2.
OUTCOMES: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

_ROW_SUM_TOL = 1e-12
_MAX_WINDOW_LEN = 8


def _outcome_index(z: tuple[int, int]) -> int:
    z1, z2 = z
    if z1 not in (0, 1) or z2 not in (0, 1):
        raise ValueError(f"erasure outcome must be a 0/1 pair, got {z!r}")
    return 2 * z1 + z2


@dataclass(frozen=True)
class ErasureStats:
    """Conditional erasure probabilities for one conditioning event.

    eps1/eps2 are the marginal erasure probabilities; eps12 both erased;
    eps1_not2 erased at 1 only; eps_not1_2 erased at 2 only; eps_not1_not2
    received by both.
    """

    eps1: float
    eps2: float
    eps12: float
    eps1_not2: float
    eps_not1_2: float
    eps_not1_not2: float

    def __post_init__(self) -> None:
        parts = (self.eps12, self.eps1_not2, self.eps_not1_2, self.eps_not1_not2)
        if min(parts) < -_ROW_SUM_TOL:
            raise ValueError("erasure probabilities must be nonnegative")
        if abs(sum(parts) - 1.0) > _ROW_SUM_TOL:
            raise ValueError("joint erasure probabilities must sum to 1")
        if abs(self.eps1 - (self.eps12 + self.eps1_not2)) > _ROW_SUM_TOL:
            raise ValueError("eps1 must equal eps12 + eps1_not2")
        if abs(self.eps2 - (self.eps12 + self.eps_not1_2)) > _ROW_SUM_TOL:
            raise ValueError("eps2 must equal eps12 + eps_not1_2")

    @classmethod
    def from_outcome_probs(cls, probs: np.ndarray) -> "ErasureStats":
        """Build stats from a length-4 vector in wire order (0,0),(0,1),(1,0),(1,1)."""
        p = np.asarray(probs, dtype=float)
        if p.shape != (4,):
            raise ValueError("expected a length-4 outcome probability vector")
        both_ok, only2_erased, only1_erased, both_erased = p
        return cls(
            eps1=float(only1_erased + both_erased),
            eps2=float(only2_erased + both_erased),
            eps12=float(both_erased),
            eps1_not2=float(only1_erased),
            eps_not1_2=float(only2_erased),
            eps_not1_not2=float(both_ok),
        )

    def as_outcome_probs(self) -> np.ndarray:
        """Inverse of from_outcome_probs."""
        return np.array(
            [self.eps_not1_not2, self.eps_not1_2, self.eps1_not2, self.eps12]
        )


@dataclass(frozen=True)
class Belief:
    """Predictive state distribution P(S_next | observations so far)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValueError("belief must be a vector")
        if p.min() < -_ROW_SUM_TOL or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("belief must lie in the probability simplex")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class FeedbackWindow:
    """The last L feedback pairs, oldest first."""

    samples: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        samples = tuple((int(z1), int(z2)) for z1, z2 in self.samples)
        for z in samples:
            _outcome_index(z)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


def _bool_power_all_positive(mask: np.ndarray, exponent: int) -> bool:
    """Whether every entry of mask^exponent (boolean semiring) is reachable."""
    acc = np.eye(mask.shape[0], dtype=bool)
    step = mask.copy()
    e = exponent
    while e:
        if e & 1:
            acc = (acc.astype(np.uint8) @ step.astype(np.uint8)) > 0
        step = (step.astype(np.uint8) @ step.astype(np.uint8)) > 0
        e >>= 1
    return bool(acc.all())


class ChannelModel:
    """Markov chain over channel states plus per-state erasure law.

    transition[s, s'] is P(S_t = s' | S_{t-1} = s); emission[s, k] is the
    probability of outcome OUTCOMES[k] while the chain sits in state s.
    Periodic chains are rejected unless allow_periodic is set; they keep a
    unique stationary distribution (Cesaro limit) but no mixing guarantees.
    """

    def __init__(
        self,
        transition: np.ndarray,
        emission: np.ndarray,
        *,
        allow_periodic: bool = False,
    ) -> None:
        P = np.array(transition, dtype=float)
        E = np.array(emission, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition must be a square matrix")
        n = P.shape[0]
        if n < 1:
            raise ValueError("need at least one state")
        if E.shape != (n, 4):
            raise ValueError("emission must have shape (num_states, 4)")
        for name, M in (("transition", P), ("emission", E)):
            if M.min() < 0:
                raise ValueError(f"{name} entries must be nonnegative")
            if np.abs(M.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
                raise ValueError(f"{name} rows must sum to 1")
        reach = (P > 0) | np.eye(n, dtype=bool)
        if not _bool_power_all_positive(reach, n):
            raise ValueError("chain is not irreducible: (I+P)^n has zero entries")
        # Wielandt's bound: an irreducible chain is aperiodic iff P^k is
        # entrywise positive at k = (n-1)^2 + 1.
        if not allow_periodic:
            if not _bool_power_all_positive(P > 0, (n - 1) ** 2 + 1):
                raise ValueError(
                    "chain is periodic; pass allow_periodic=True to admit it"
                )
        P.setflags(write=False)
        E.setflags(write=False)
        self.num_states = n
        self.transition = P
        self.emission = E
        self.allow_periodic = allow_periodic

    def __repr__(self) -> str:
        return f"ChannelModel(num_states={self.num_states}, allow_periodic={self.allow_periodic})"


def stationary_distribution(model: ChannelModel) -> np.ndarray:
    """Unique pi with pi P = pi, found by a direct linear solve."""
    n = model.num_states
    A = model.transition.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    residual = np.abs(pi @ model.transition - pi).max()
    if pi.min() <= 0 or residual > _ROW_SUM_TOL:
        raise ArithmeticError(f"stationary solve failed, residual={residual:.2e}")
    return pi


def cond_erasure_visible(
    model: ChannelModel, prev_state: int, delay: int = 1
) -> ErasureStats:
    """Erasure law of the current slot given the state observed `delay` slots ago."""
    if delay < 1:
        raise ValueError("delay must be at least 1")
    if not 0 <= prev_state < model.num_states:
        raise ValueError("prev_state out of range")
    step = np.linalg.matrix_power(model.transition, delay)
    return ErasureStats.from_outcome_probs(step[prev_state] @ model.emission)


def belief_update(
    model: ChannelModel, belief: Belief, observed: tuple[int, int]
) -> Belief:
    """One correct-then-predict filter step on an observed feedback pair."""
    k = _outcome_index(observed)
    likelihood = model.emission[:, k]
    weighted = belief.probs * likelihood
    total = weighted.sum()
    if total <= 0:
        raise ValueError(
            f"observation {observed!r} has probability 0 under the current belief"
        )
    return Belief(probs=(weighted / total) @ model.transition)


def _window_belief(model: ChannelModel, window: FeedbackWindow) -> Belief:
    belief = Belief(probs=stationary_distribution(model))
    for z in window.samples:
        belief = belief_update(model, belief, z)
    return belief


def cond_erasure_hidden(
    model: ChannelModel, conditioning: Belief | FeedbackWindow
) -> ErasureStats:
    """Predicted erasure law under a belief or a finite feedback window.

    A window is folded into a belief by running the filter from the
    stationary distribution over its samples.
    """
    if isinstance(conditioning, FeedbackWindow):
        belief = _window_belief(model, conditioning)
    else:
        belief = conditioning
    if belief.probs.shape != (model.num_states,):
        raise ValueError("belief dimension does not match the model")
    return ErasureStats.from_outcome_probs(belief.probs @ model.emission)


def window_distribution(
    model: ChannelModel, window_len: int, max_len: int = _MAX_WINDOW_LEN
) -> dict[tuple[tuple[int, int], ...], float]:
    """Stationary probability of every feedback window of the given length."""
    if window_len < 0:
        raise ValueError("window length must be nonnegative")
    if window_len > max_len:
        raise ValueError(
            f"window length {window_len} exceeds the configured maximum {max_len}"
        )
    # alpha[w, s] = P(window w so far, next state = s); one forward step per level.
    alpha = stationary_distribution(model)[np.newaxis, :]
    for _ in range(window_len):
        corrected = alpha[:, np.newaxis, :] * model.emission.T[np.newaxis, :, :]
        alpha = corrected.reshape(-1, model.num_states) @ model.transition
    probs = alpha.sum(axis=1)
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(f"window probabilities sum to {total!r}")
    keys: list[tuple[tuple[int, int], ...]] = [()]
    for _ in range(window_len):
        keys = [key + (outcome,) for key in keys for outcome in OUTCOMES]
    return {key: float(p) for key, p in zip(keys, probs)}


def forgetting_check(
    model: ChannelModel, window_len: int, trace_len: int, seed: int
) -> float:
    """Max total-variation gap between full-history and windowed predictions.

    Samples one trace and compares, at every slot, the filter run from the
    start against the filter restarted from the stationary distribution
    window_len slots back.
    """
    if (model.emission <= 0).any():
        raise ValueError("forgetting bound requires strictly positive emissions")
    if window_len < 1 or trace_len < 1:
        raise ValueError("window_len and trace_len must be positive")
    rng = np.random.default_rng(seed)
    pi = stationary_distribution(model)
    n = model.num_states
    state = int(rng.choice(n, p=pi))
    # Row 0: full-history belief. Row k>=1: belief started k-1 slots ago;
    # after the shift below, row window_len holds the L-window belief.
    bank = np.tile(pi, (window_len + 1, 1))
    worst = 0.0
    for _ in range(trace_len):
        state, z = sample_step(model, state, rng)
        bank *= model.emission[:, _outcome_index(z)]
        bank /= bank.sum(axis=1, keepdims=True)
        bank = bank @ model.transition
        gap = 0.5 * np.abs(bank[0] - bank[-1]).sum()
        worst = max(worst, float(gap))
        bank[1:] = bank[:-1].copy()
        bank[1] = pi
    return worst


def sample_step(
    model: ChannelModel, current_state: int, rng: np.random.Generator
) -> tuple[int, tuple[int, int]]:
    """Advance the chain one slot and emit a feedback pair."""
    next_state = int(
        np.searchsorted(np.cumsum(model.transition[current_state]), rng.random())
    )
    next_state = min(next_state, model.num_states - 1)
    k = int(np.searchsorted(np.cumsum(model.emission[next_state]), rng.random()))
    return next_state, OUTCOMES[min(k, 3)]


def _ge_user_chain(eps: float, g: float) -> np.ndarray:
    """Two-state good/bad chain with recovery rate g and average erasure eps."""
    if not 0 < eps < 1 or not 0 < g < 1:
        raise ValueError("need 0 < eps < 1 and 0 < g < 1")
    b = g * eps / (1.0 - eps)
    if b >= 1:
        raise ValueError(f"derived bad-ward rate b={b:.4f} is not a probability")
    return np.array([[1.0 - b, b], [g, 1.0 - g]])


def _tensor_two_users(P1: np.ndarray, P2: np.ndarray) -> np.ndarray:
    """Joint chain over (user1 state, user2 state), index = 2*u1 + u2."""
    return np.kron(P1, P2)


def ge_visible(eps1: float, g1: float, eps2: float, g2: float) -> ChannelModel:
    """Gilbert-Elliot channel whose state reveals the erasures deterministically.

    Per-user chains over good/bad; a user in the bad state is erased.  State
    index 2*u1 + u2 with u_j = 0 for good.
    """
    P = _tensor_two_users(_ge_user_chain(eps1, g1), _ge_user_chain(eps2, g2))
    E = np.zeros((4, 4))
    for u1 in (0, 1):
        for u2 in (0, 1):
            E[2 * u1 + u2, _outcome_index((u1, u2))] = 1.0
    return ChannelModel(P, E)


def ge_hidden(
    eps1: float,
    g1: float,
    eps2: float,
    g2: float,
    eps1_good: float,
    eps1_bad: float,
    eps2_good: float,
    eps2_bad: float,
) -> ChannelModel:
    """Gilbert-Elliot channel with noisy per-state erasure probabilities.

    Each user erases with probability eps_good in the good state and
    eps_bad in the bad state, independently across users.
    """
    P = _tensor_two_users(_ge_user_chain(eps1, g1), _ge_user_chain(eps2, g2))
    per_user = (
        np.array([eps1_good, eps1_bad]),
        np.array([eps2_good, eps2_bad]),
    )
    for e in per_user:
        if e.min() < 0 or e.max() > 1:
            raise ValueError("per-state erasure probabilities must be in [0,1]")
    E = np.zeros((4, 4))
    for u1 in (0, 1):
        for u2 in (0, 1):
            p1, p2 = per_user[0][u1], per_user[1][u2]
            for z1 in (0, 1):
                for z2 in (0, 1):
                    pz1 = p1 if z1 else 1.0 - p1
                    pz2 = p2 if z2 else 1.0 - p2
                    E[2 * u1 + u2, _outcome_index((z1, z2))] = pz1 * pz2
    return ChannelModel(P, E)


def memoryless(outcome_probs: np.ndarray) -> ChannelModel:
    """Single-state channel with the given joint erasure law."""
    p = np.asarray(outcome_probs, dtype=float).reshape(1, 4)
    return ChannelModel(np.array([[1.0]]), p)


def load_channel(source: str | Path | dict) -> ChannelModel:
    """Build a ChannelModel from a JSON document or an equivalent dict.

    Either {"states": n, "transition": [...], "emission": [...]} with
    row-major matrices, or {"gilbert_elliot": {"kind": "visible"|"hidden",
    "eps1", "g1", "eps2", "g2"[, "eps1_good", "eps1_bad", "eps2_good",
    "eps2_bad"]}}.  An optional top-level "allow_periodic" admits periodic
    chains.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    if "gilbert_elliot" in doc:
        ge = doc["gilbert_elliot"]
        kind = ge.get("kind", "visible")
        common = (ge["eps1"], ge["g1"], ge["eps2"], ge["g2"])
        if kind == "visible":
            return ge_visible(*common)
        if kind == "hidden":
            return ge_hidden(
                *common,
                ge["eps1_good"],
                ge["eps1_bad"],
                ge["eps2_good"],
                ge["eps2_bad"],
            )
        raise ValueError(f"unknown gilbert_elliot kind {kind!r}")
    n = int(doc["states"])
    transition = np.asarray(doc["transition"], dtype=float).reshape(n, n)
    emission = np.asarray(doc["emission"], dtype=float).reshape(n, 4)
    return ChannelModel(
        transition, emission, allow_periodic=bool(doc.get("allow_periodic", False))
    )
