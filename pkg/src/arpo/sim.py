"""Tabular policy-optimization loop on synthetic, imbalanced multi-domain tasks.

Every prompt is a one-step categorical choice among ``A`` actions, so a
"response" is a single action and the sequence-level KL collapses to one
exact categorical KL. The loop samples a group per prompt, scores it, turns
rewards into advantages with :func:`arpo.advantage.compute_arpo`, and takes a
gradient-ascent step on the clipped surrogate minus a KL penalty to the
initial policy.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .advantage import STRATEGIES, ArpoConfig, RolloutGroup, compute_arpo
from .errors import ConfigError, InputError
from .rewards import CognitiveDomain, GroundTruth, RewardWeights, TaskKind, score_rollout

TOY_WEIGHTS = RewardWeights(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class ToyTask:
    prompt_id: str
    domain: CognitiveDomain
    num_actions: int
    correct: int
    deceptive: int | None = None

    def __post_init__(self) -> None:
        if self.num_actions < 2:
            raise InputError("toy tasks need at least 2 actions")
        if not 0 <= self.correct < self.num_actions:
            raise InputError(f"correct index {self.correct} out of range")
        if self.deceptive is not None and (
            self.deceptive == self.correct or not 0 <= self.deceptive < self.num_actions
        ):
            raise InputError(f"invalid deceptive index {self.deceptive}")


@dataclass(frozen=True)
class EnvConfig:
    counts: Mapping[str, int] = field(
        default_factory=lambda: {"OU": 70, "SU": 15, "SP": 8, "SR": 7}
    )
    num_actions: int = 4
    deceptive_fraction: float = 1.0
    deceptive_logit: float = 2.0
    hard_domain: str = "SR"
    seed: int = 0

    def __post_init__(self) -> None:
        for name, n in self.counts.items():
            CognitiveDomain.parse(name)
            if n < 1:
                raise ConfigError(f"env.counts.{name} must be >= 1")
        CognitiveDomain.parse(self.hard_domain)
        if self.num_actions < 2:
            raise ConfigError("env.num_actions must be >= 2")
        if not 0.0 <= self.deceptive_fraction <= 1.0:
            raise ConfigError("env.deceptive_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 8
    clip_eps: float = 0.2
    kl_coef: float = 0.05
    temperature: float = 0.9
    learning_rate: float = 0.02
    total_steps: int = 1000
    batch_prompts: int = 32
    # global L2 clip on the logit gradient of one step; None disables
    max_grad_norm: float | None = 1.0
    seed: int = 0
    strategy: str = "ARPO"

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ConfigError("train.group_size must be >= 2")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("train.clip_eps must lie in (0, 1)")
        if self.kl_coef < 0:
            raise ConfigError("train.kl_coef must be >= 0")
        if not self.temperature > 0:
            raise ConfigError("train.temperature must be > 0")
        if self.learning_rate < 0:
            raise ConfigError("train.learning_rate must be >= 0")
        if self.total_steps < 1 or self.batch_prompts < 1:
            raise ConfigError("train.total_steps and train.batch_prompts must be >= 1")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ConfigError("train.max_grad_norm must be > 0 or null")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")


# --- environment and policy ------------------------------------------------


def make_env(
    counts: Mapping[str | CognitiveDomain, int],
    num_actions: int = 4,
    deceptive_fraction: float = 0.0,
    seed: int = 0,
    hard_domain: str | CognitiveDomain = CognitiveDomain.SceneReasoning,
) -> list[ToyTask]:
    """Build a deterministic task set; deceptive priors only in ``hard_domain``."""
    rng = np.random.default_rng(seed)
    hard = hard_domain if isinstance(hard_domain, CognitiveDomain) else CognitiveDomain.parse(hard_domain)
    tasks = []
    for key, n in counts.items():
        domain = key if isinstance(key, CognitiveDomain) else CognitiveDomain.parse(key)
        if n < 1:
            raise InputError(f"domain {domain.value} needs at least one prompt")
        correct = rng.integers(num_actions, size=n)
        n_dec = round(deceptive_fraction * n) if domain is hard else 0
        dec_rows = set(rng.choice(n, size=n_dec, replace=False).tolist()) if n_dec else set()
        for i in range(n):
            deceptive = None
            if i in dec_rows:
                # any wrong action, chosen uniformly
                off = int(rng.integers(1, num_actions))
                deceptive = int((correct[i] + off) % num_actions)
            tasks.append(
                ToyTask(f"{domain.code}-{i:03d}", domain, num_actions, int(correct[i]), deceptive)
            )
    return tasks


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class TabularPolicy:
    """One row of action logits per prompt."""

    logits: np.ndarray
    temperature: float = 1.0

    def __post_init__(self) -> None:
        self.logits = np.array(self.logits, dtype=np.float64)
        if self.logits.ndim != 2 or self.logits.shape[1] < 2:
            raise InputError("policy logits must be (prompts, actions>=2)")

    @classmethod
    def from_tasks(
        cls, tasks: Sequence[ToyTask], deceptive_logit: float = 2.0, temperature: float = 1.0
    ) -> "TabularPolicy":
        n_actions = {t.num_actions for t in tasks}
        if len(n_actions) != 1:
            raise InputError("all tasks must share one action-space size")
        logits = np.zeros((len(tasks), n_actions.pop()))
        for i, t in enumerate(tasks):
            if t.deceptive is not None:
                logits[i, t.deceptive] = deceptive_logit
        return cls(logits, temperature)

    def copy(self) -> "TabularPolicy":
        return TabularPolicy(self.logits.copy(), self.temperature)

    def probs(self, prompt: int | None = None) -> np.ndarray:
        z = self.logits if prompt is None else self.logits[prompt]
        return softmax(z)

    def sampling_probs(self, prompt: int | None = None) -> np.ndarray:
        z = self.logits if prompt is None else self.logits[prompt]
        return softmax(z / self.temperature)


def sample_group(
    policy: TabularPolicy,
    prompt: int,
    group_size: int,
    temperature: float | None = None,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``group_size`` i.i.d. actions from the temperature-scaled policy.

    Returned log-probabilities are under the untempered policy (the old policy
    of the ratio).
    """
    if group_size < 2:
        raise InputError("group size must be >= 2")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    temp = policy.temperature if temperature is None else temperature
    p = softmax(policy.logits[prompt] / temp)
    cdf = np.cumsum(p)
    u = rng.random(group_size) * cdf[-1]
    actions = np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)
    logp_old = log_softmax(policy.logits[prompt])[actions]
    return actions, logp_old


def categorical_kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def exact_kl(policy_a: TabularPolicy, policy_b: TabularPolicy, prompt: int) -> float:
    if policy_a.logits.shape[1] != policy_b.logits.shape[1]:
        raise InputError("policies have different action spaces")
    la = log_softmax(policy_a.logits[prompt])
    lb = log_softmax(policy_b.logits[prompt])
    return max(float(np.sum(np.exp(la) * (la - lb))), 0.0)


def clipped_surrogate(ratio, adv, clip_eps: float):
    """Per-sample ``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv)


def surrogate_objective(
    logits: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    logp_old: np.ndarray,
    clip_eps: float,
    kl_coef: float,
    ref_logits: np.ndarray,
) -> float:
    """Mean clipped surrogate over the group minus ``kl_coef * KL(pi || pi_ref)``."""
    logp = log_softmax(np.asarray(logits, dtype=float))
    ratio = np.exp(logp[actions] - logp_old)
    kl = float(np.sum(np.exp(logp) * (logp - log_softmax(np.asarray(ref_logits, dtype=float)))))
    return float(clipped_surrogate(ratio, advantages, clip_eps).mean()) - kl_coef * kl


def clipped_surrogate_grad(
    logits: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    logp_old: np.ndarray,
    clip_eps: float,
    kl_coef: float,
    ref_logits: np.ndarray,
) -> np.ndarray:
    """Gradient of :func:`surrogate_objective` with respect to one prompt's logits."""
    actions = np.asarray(actions)
    advantages = np.asarray(advantages, dtype=float)
    logp_old = np.asarray(logp_old, dtype=float)
    if not len(actions) == len(advantages) == len(logp_old):
        raise InputError("actions, advantages and old log-probs differ in length")
    logits = np.asarray(logits, dtype=float)
    logp = log_softmax(logits)
    pi = np.exp(logp)
    ratio = np.exp(logp[actions] - logp_old)
    # the clipped branch is the min, and flat, once the ratio leaves the trust
    # region in the direction the advantage favors
    active = np.where(advantages >= 0, ratio <= 1.0 + clip_eps, ratio >= 1.0 - clip_eps)
    w = np.where(active, advantages * ratio, 0.0)
    grad = -pi * w.sum()
    np.add.at(grad, actions, w)
    grad /= len(actions)
    if kl_coef:
        log_ratio = logp - log_softmax(np.asarray(ref_logits, dtype=float))
        kl = float(np.sum(pi * log_ratio))
        grad -= kl_coef * pi * (log_ratio - kl)
    return grad


# --- training --------------------------------------------------------------


@dataclass(frozen=True)
class StepMetric:
    step: int
    domain: str
    mean_reward: float
    mean_abs_advantage: float
    skipped: int
    groups: int


@dataclass
class RunMetrics:
    strategy: str
    seed: int
    steps: list[StepMetric] = field(default_factory=list)
    final_accuracy: dict[str, float] = field(default_factory=dict)
    final_expected_accuracy: dict[str, float] = field(default_factory=dict)
    final_mean_kl: float = 0.0
    final_logits: np.ndarray | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "domain", "mean_reward", "mean_abs_advantage", "skipped", "groups"])
        for s in self.steps:
            w.writerow([s.step, s.domain, repr(s.mean_reward), repr(s.mean_abs_advantage), s.skipped, s.groups])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "final_accuracy": self.final_accuracy,
            "final_expected_accuracy": self.final_expected_accuracy,
            "final_mean_kl": self.final_mean_kl,
            "steps": len({s.step for s in self.steps}),
        }


def _reward_table(num_actions: int) -> np.ndarray:
    """reward[a, c]: exact-match reward of action ``a`` when ``c`` is correct."""
    letters = [chr(ord("A") + i) for i in range(num_actions)]
    table = np.zeros((num_actions, num_actions))
    for c, gt_letter in enumerate(letters):
        gt = GroundTruth("choice", gt_letter)
        for a, letter in enumerate(letters):
            table[a, c] = score_rollout(letter, gt, TaskKind.SingleChoice, TOY_WEIGHTS).r_total
    return table


def domain_accuracy(policy: TabularPolicy, tasks: Sequence[ToyTask]) -> tuple[dict[str, float], dict[str, float]]:
    """Greedy accuracy and expected (sampling) accuracy per domain."""
    greedy: dict[str, list[float]] = {}
    expected: dict[str, list[float]] = {}
    samp = policy.sampling_probs()
    for i, t in enumerate(tasks):
        greedy.setdefault(t.domain.value, []).append(float(np.argmax(policy.logits[i]) == t.correct))
        expected.setdefault(t.domain.value, []).append(float(samp[i, t.correct]))
    return (
        {d: float(np.mean(v)) for d, v in greedy.items()},
        {d: float(np.mean(v)) for d, v in expected.items()},
    )


def run_training(
    cfg: TrainConfig,
    tasks: Sequence[ToyTask],
    arpo: ArpoConfig = ArpoConfig(),
    deceptive_logit: float = 2.0,
    policy: TabularPolicy | None = None,
) -> RunMetrics:
    """Train a tabular policy; the reference policy is the initial one."""
    rng = np.random.default_rng(cfg.seed)
    if policy is None:
        policy = TabularPolicy.from_tasks(tasks, deceptive_logit, cfg.temperature)
    else:
        policy = policy.copy()
        policy.temperature = cfg.temperature
    ref = policy.copy()
    adv_cfg = arpo.for_strategy(cfg.strategy)
    table = _reward_table(policy.logits.shape[1])
    correct = np.array([t.correct for t in tasks])
    n_prompts = len(tasks)
    batch = min(cfg.batch_prompts, n_prompts)
    metrics = RunMetrics(strategy=cfg.strategy, seed=cfg.seed)
    domains = sorted({t.domain.value for t in tasks})

    for step in range(cfg.total_steps):
        chosen = np.sort(rng.choice(n_prompts, size=batch, replace=False))
        groups, samples = [], {}
        for idx in chosen:
            actions, logp_old = sample_group(policy, idx, cfg.group_size, cfg.temperature, rng)
            rewards = table[actions, correct[idx]]
            kl = exact_kl(policy, ref, idx)
            groups.append(RolloutGroup(tasks[idx].prompt_id, tasks[idx].domain, rewards, np.full(len(actions), kl)))
            samples[tasks[idx].prompt_id] = (idx, actions, logp_old)

        result = compute_arpo(groups, step, adv_cfg, total_steps=cfg.total_steps)
        advs: dict[str, np.ndarray] = {}
        for rec in result.records:
            advs.setdefault(rec.prompt_id, np.zeros(cfg.group_size))[rec.index] = rec.a_final

        grads = np.zeros_like(policy.logits)
        for pid, a in advs.items():
            idx, actions, logp_old = samples[pid]
            grads[idx] = clipped_surrogate_grad(
                policy.logits[idx], actions, a, logp_old, cfg.clip_eps, cfg.kl_coef, ref.logits[idx]
            )
        if cfg.max_grad_norm is not None:
            norm = float(np.sqrt((grads**2).sum()))
            if norm > cfg.max_grad_norm:
                grads *= cfg.max_grad_norm / norm
        policy.logits += cfg.learning_rate * grads

        skipped = set(result.skip_report.skipped)
        for d in domains:
            dg = [g for g in groups if g.domain.value == d]
            if not dg:
                continue
            recs = [abs(r.a_final) for r in result.records if r.domain.value == d]
            metrics.steps.append(
                StepMetric(
                    step=step,
                    domain=d,
                    mean_reward=float(np.mean([g.rewards.mean() for g in dg])),
                    mean_abs_advantage=float(np.mean(recs)) if recs else 0.0,
                    skipped=sum(g.prompt_id in skipped for g in dg),
                    groups=len(dg),
                )
            )

    metrics.final_accuracy, metrics.final_expected_accuracy = domain_accuracy(policy, tasks)
    metrics.final_mean_kl = float(np.mean([exact_kl(policy, ref, i) for i in range(n_prompts)]))
    metrics.final_logits = policy.logits.copy()
    return metrics


# --- strategy comparison ---------------------------------------------------


@dataclass
class ComparisonReport:
    strategies: list[str]
    seeds: list[int]
    minority_domain: str
    accuracy: dict[str, dict[int, dict[str, float]]]

    def minority_accuracy(self, strategy: str) -> list[float]:
        return [self.accuracy[strategy][s][self.minority_domain] for s in self.seeds]

    def minority_mean(self, strategy: str) -> float:
        return float(np.mean(self.minority_accuracy(strategy)))

    def wins(self, strategy: str, baseline: str | None = None) -> int:
        """Seeds where ``strategy`` matches or beats ``baseline`` on the minority domain."""
        base = self.minority_accuracy(baseline or self.strategies[0])
        return sum(a >= b for a, b in zip(self.minority_accuracy(strategy), base))

    def to_json(self) -> dict:
        baseline = self.strategies[0]
        return {
            "strategies": self.strategies,
            "seeds": self.seeds,
            "baseline": baseline,
            "minority_domain": self.minority_domain,
            "accuracy": {st: {str(s): acc for s, acc in per.items()} for st, per in self.accuracy.items()},
            "minority_mean": {st: self.minority_mean(st) for st in self.strategies},
            "wins_vs_baseline": {st: self.wins(st) for st in self.strategies},
        }


def compare_strategies(
    base: TrainConfig,
    strategies: Sequence[str],
    seeds: Sequence[int],
    env: EnvConfig = EnvConfig(),
    arpo: ArpoConfig = ArpoConfig(),
    on_run=None,
) -> ComparisonReport:
    """Run every strategy on every seed; seed ``s`` builds the env with ``env.seed + s``.

    ``on_run(metrics)`` is called after each run when given.
    """
    if len(strategies) < 2:
        raise ConfigError("comparison needs at least 2 strategies")
    if len(seeds) < 3:
        raise ConfigError("comparison needs at least 3 seeds")
    accuracy: dict[str, dict[int, dict[str, float]]] = {st: {} for st in strategies}
    minority = min(env.counts, key=lambda k: (env.counts[k], k))
    minority_domain = CognitiveDomain.parse(minority).value
    for seed in seeds:
        tasks = make_env(env.counts, env.num_actions, env.deceptive_fraction, env.seed + seed, env.hard_domain)
        for st in strategies:
            m = run_training(replace(base, strategy=st, seed=seed), tasks, arpo, env.deceptive_logit)
            accuracy[st][seed] = m.final_accuracy
            if on_run is not None:
                on_run(m)
    return ComparisonReport(list(strategies), list(seeds), minority_domain, accuracy)
