"""Group-relative advantages with hierarchical temperature scaling.

Pipeline (``compute_arpo``), applied to one batch of rollout groups:

1. drop near-uniform groups (reward range below a threshold);
2. group-normalize rewards (GRPO advantages);
3. per-domain temperature ``T(g) = max(N(g) * mu(g), floor)``;
4. k-means over each domain's sorted reward vectors, one temperature per cluster;
5. divide by ``(T(g) * T(c, g)) ** lambda(t)`` with ``lambda(t) = (t / total) ** p``;
6. KL-aware dampening ``m = t_p / (t_p + max(s * kl, 0))``;
7. divide by the batch standard deviation.

Every intermediate value is kept on the returned :class:`AdvantageRecord`.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .kmeans import kmeans
from .rewards import CognitiveDomain

Strategy = Literal["GRPO", "DomainOnly", "ARPO"]
STRATEGIES: tuple[str, ...] = ("GRPO", "DomainOnly", "ARPO")


@dataclass
class RolloutGroup:
    prompt_id: str
    domain: CognitiveDomain
    rewards: np.ndarray
    kl: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.rewards.ndim != 1 or len(self.rewards) < 2:
            raise InputError(f"group {self.prompt_id!r} needs at least 2 rewards")
        if not np.isfinite(self.rewards).all():
            raise InputError(f"group {self.prompt_id!r} has non-finite rewards")
        if self.kl is None:
            self.kl = np.zeros_like(self.rewards)
        kl = np.asarray(self.kl, dtype=float)
        if kl.shape != self.rewards.shape:
            raise InputError(f"group {self.prompt_id!r}: kl and rewards differ in length")
        if not np.isfinite(kl).all():
            raise InputError(f"group {self.prompt_id!r} has non-finite kl values")
        self.kl = np.maximum(kl, 0.0)

    @property
    def size(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class DomainStats:
    domain: CognitiveDomain
    n_groups: int
    mean_reward: float
    temperature: float


@dataclass(frozen=True)
class ClusterStats:
    domain: CognitiveDomain
    cluster: int
    members: tuple[str, ...]
    temperature: float


@dataclass(frozen=True)
class CurriculumSchedule:
    total_steps: int
    p: float = 1.0

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ConfigError("curriculum total_steps must be >= 1")
        if not self.p >= 0:
            raise ConfigError("curriculum exponent must be >= 0")


@dataclass(frozen=True)
class DampeningConfig:
    percentile: float = 0.9
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.percentile < 1.0:
            raise ConfigError("dampening percentile must lie in (0, 1)")
        if not self.eps > 0:
            raise ConfigError("dampening floor must be > 0")


@dataclass(frozen=True)
class ArpoConfig:
    """Knobs for :func:`compute_arpo`. Field names double as config-file keys."""

    grpo_eps: float = 1e-4
    skip_threshold: float = 0.05
    temp_floor: float = 1e-6
    domain_scaling: bool = True
    cluster_scaling: bool = True
    kmeans_k: int = 3
    kmeans_seed: int = 0
    kmeans_n_init: int = 10
    kmeans_max_iter: int = 100
    curriculum_p: float = 1.0
    # when set, replaces the curriculum schedule with a constant exponent
    fixed_lambda: float | None = None
    kl_dampening: bool = True
    damp_percentile: float = 0.9
    damp_eps: float = 1e-8
    renorm: Literal["global", "domain"] = "global"

    def __post_init__(self) -> None:
        if not self.grpo_eps >= 0:
            raise ConfigError("grpo_eps must be >= 0")
        if not self.temp_floor > 0:
            raise ConfigError("temp_floor must be > 0")
        if self.kmeans_k < 1:
            raise ConfigError("kmeans_k must be >= 1")
        if self.fixed_lambda is not None and not 0.0 <= self.fixed_lambda <= 1.0:
            raise ConfigError("fixed_lambda must lie in [0, 1]")
        if self.renorm not in ("global", "domain"):
            raise ConfigError(f"renorm must be 'global' or 'domain', got {self.renorm!r}")
        DampeningConfig(self.damp_percentile, self.damp_eps)

    @property
    def dampening(self) -> DampeningConfig:
        return DampeningConfig(self.damp_percentile, self.damp_eps)

    def for_strategy(self, strategy: str) -> "ArpoConfig":
        """Preset for one of ``GRPO``, ``DomainOnly`` or ``ARPO``."""
        if strategy == "GRPO":
            return replace(self, domain_scaling=False, cluster_scaling=False, kl_dampening=False)
        if strategy == "DomainOnly":
            return replace(self, domain_scaling=True, cluster_scaling=False)
        if strategy == "ARPO":
            return replace(self, domain_scaling=True, cluster_scaling=True)
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    @classmethod
    def from_dict(cls, data: dict) -> "ArpoConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key 'advantage.{key}'")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdvantageRecord:
    prompt_id: str
    index: int
    domain: CognitiveDomain
    reward: float
    a_grpo: float
    s_scaled: float
    m: float
    a_final: float
    t_domain: float = 1.0
    t_cluster: float = 1.0
    cluster: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["domain"] = self.domain.value
        return d


@dataclass
class SkipReport:
    total_groups: int
    skipped: list[str] = field(default_factory=list)

    @property
    def retained(self) -> int:
        return self.total_groups - len(self.skipped)

    def to_json(self) -> dict:
        return {"total_groups": self.total_groups, "retained": self.retained, "skipped": list(self.skipped)}


@dataclass
class ArpoResult:
    records: list[AdvantageRecord]
    skip_report: SkipReport
    lambda_t: float
    t_p: float | None = None
    domain_stats: list[DomainStats] = field(default_factory=list)
    cluster_stats: list[ClusterStats] = field(default_factory=list)
    degenerate_std: bool = False

    @property
    def a_final(self) -> np.ndarray:
        return np.array([r.a_final for r in self.records])

    @property
    def a_grpo(self) -> np.ndarray:
        return np.array([r.a_grpo for r in self.records])


# --- stages ----------------------------------------------------------------


def grpo_advantages(rewards: Sequence[float] | np.ndarray, eps: float = 1e-4) -> np.ndarray:
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or len(r) < 2:
        raise InputError("group-relative advantages need at least 2 rewards")
    if r.max() == r.min():
        return np.zeros_like(r)
    # population std, no Bessel correction
    return (r - r.mean()) / (r.std() + eps)


def is_near_uniform(rewards: Sequence[float] | np.ndarray, threshold: float = 0.05) -> bool:
    r = np.asarray(rewards, dtype=float)
    return float(r.max() - r.min()) < threshold


def skip_degenerate_groups(
    groups: Sequence[RolloutGroup], threshold: float = 0.05
) -> tuple[list[RolloutGroup], SkipReport]:
    kept, report = [], SkipReport(total_groups=len(groups))
    for g in groups:
        if is_near_uniform(g.rewards, threshold):
            report.skipped.append(g.prompt_id)
        else:
            kept.append(g)
    return kept, report


def domain_temperature(n: int, mu: float, eps_t: float = 1e-6) -> float:
    return max(n * mu, eps_t)


def cluster_temperature(member_groups: Sequence[RolloutGroup], eps_t: float = 1e-6) -> float:
    """Count-times-mean temperature of a cluster of prompt groups."""
    if not member_groups:
        raise InputError("cluster has no member groups")
    mu = float(np.concatenate([g.rewards for g in member_groups]).mean())
    return domain_temperature(len(member_groups), mu, eps_t)


def curriculum_lambda(step: int, schedule: CurriculumSchedule) -> float:
    if not 0 <= step <= schedule.total_steps:
        raise InputError(f"step {step} outside [0, {schedule.total_steps}]")
    return (step / schedule.total_steps) ** schedule.p


def hierarchical_scale(a_grpo, t_domain: float, t_cluster: float, lam: float):
    if t_domain <= 0 or t_cluster <= 0:
        raise InputError("temperatures must be positive")
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda {lam} outside [0, 1]")
    return a_grpo / (t_domain * t_cluster) ** lam


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    x = np.sort(np.asarray(values, dtype=float))
    rank = max(math.ceil(q * len(x)), 1)
    return float(x[rank - 1])


def dampening_threshold(products: np.ndarray, cfg: DampeningConfig = DampeningConfig()) -> float:
    """Nearest-rank percentile of the advantage-KL products, floored at ``cfg.eps``."""
    t_p = nearest_rank_quantile(products, cfg.percentile)
    return t_p if t_p > 0.0 else cfg.eps


def kl_dampen(
    s_scaled: Sequence[float] | np.ndarray,
    kl: Sequence[float] | np.ndarray,
    cfg: DampeningConfig = DampeningConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Return the dampening factors and the dampened advantages."""
    s = np.asarray(s_scaled, dtype=float)
    k = np.asarray(kl, dtype=float)
    if s.shape != k.shape:
        raise InputError("advantages and kl values differ in length")
    if len(s) == 0:
        return np.ones(0), np.zeros(0)
    prod = s * k
    t_p = dampening_threshold(prod, cfg)
    m = t_p / (t_p + np.maximum(prod, 0.0))
    return m, m * s




def batch_renormalize(advs: Sequence[float] | np.ndarray) -> tuple[np.ndarray, bool]:
    """Divide by the population std (no centering).

    Returns ``(values, degenerate)``; a zero-std or single-element batch is
    returned unchanged with ``degenerate=True``.
    """
    a = np.asarray(advs, dtype=float)
    if len(a) < 2:
        return a.copy(), True
    sd = float(a.std())
    if sd == 0.0 or not math.isfinite(sd):
        return a.copy(), True
    return a / sd, False


# --- end to end ------------------------------------------------------------


def _cluster_domain(
    groups: list[RolloutGroup], cfg: ArpoConfig
) -> list[tuple[int, list[RolloutGroup]]]:
    """Split one domain's groups into clusters; clustering is done per group size."""
    by_size: dict[int, list[RolloutGroup]] = defaultdict(list)
    for g in groups:
        by_size[g.size].append(g)
    clusters: list[tuple[int, list[RolloutGroup]]] = []
    for size in sorted(by_size):
        members = by_size[size]
        if not cfg.cluster_scaling:
            clusters.append((len(clusters), members))
            continue
        vectors = np.array([np.sort(g.rewards) for g in members])
        res = kmeans(
            vectors,
            k=min(cfg.kmeans_k, len(members)),
            seed=cfg.kmeans_seed,
            max_iter=cfg.kmeans_max_iter,
            n_init=cfg.kmeans_n_init,
        )
        base = len(clusters)
        for j in range(int(res.labels.max()) + 1):
            part = [g for g, lab in zip(members, res.labels) if lab == j]
            if part:
                clusters.append((base + j, part))
    return clusters


def compute_arpo(
    groups: Iterable[RolloutGroup],
    step: int,
    cfg: ArpoConfig = ArpoConfig(),
    total_steps: int = 1,
) -> ArpoResult:
    groups = list(groups)
    pids = [g.prompt_id for g in groups]
    if len(set(pids)) != len(pids):
        raise InputError("duplicate prompt_id in batch")
    kept, report = skip_degenerate_groups(groups, cfg.skip_threshold)

    if cfg.fixed_lambda is not None:
        lam = cfg.fixed_lambda
    else:
        lam = curriculum_lambda(step, CurriculumSchedule(total_steps, cfg.curriculum_p))

    if not kept:
        return ArpoResult(records=[], skip_report=report, lambda_t=lam)

    by_domain: dict[CognitiveDomain, list[RolloutGroup]] = defaultdict(list)
    for g in kept:
        by_domain[g.domain].append(g)

    a_grpo = {g.prompt_id: grpo_advantages(g.rewards, cfg.grpo_eps) for g in kept}
    t_dom: dict[str, float] = {}
    t_clu: dict[str, tuple[int, float]] = {}
    domain_stats, cluster_stats = [], []
    for domain in sorted(by_domain, key=lambda d: d.value):
        members = by_domain[domain]
        mu = float(np.concatenate([g.rewards for g in members]).mean())
        t_g = domain_temperature(len(members), mu, cfg.temp_floor) if cfg.domain_scaling else 1.0
        domain_stats.append(DomainStats(domain, len(members), mu, t_g))
        for cid, part in _cluster_domain(members, cfg):
            t_cg = cluster_temperature(part, cfg.temp_floor) if cfg.cluster_scaling else 1.0
            cluster_stats.append(ClusterStats(domain, cid, tuple(g.prompt_id for g in part), t_cg))
            for g in part:
                t_dom[g.prompt_id] = t_g
                t_clu[g.prompt_id] = (cid, t_cg)

    # flatten in input order
    rows = []
    for g in kept:
        cid, t_cg = t_clu[g.prompt_id]
        t_g = t_dom[g.prompt_id]
        s = hierarchical_scale(a_grpo[g.prompt_id], t_g, t_cg, lam)
        for i in range(g.size):
            rows.append((g, i, t_g, t_cg, cid, float(s[i])))

    s_all = np.array([r[5] for r in rows])
    kl_all = np.array([float(r[0].kl[r[1]]) for r in rows])
    t_p = None
    if cfg.kl_dampening:
        m_all, damped = kl_dampen(s_all, kl_all, cfg.dampening)
        t_p = dampening_threshold(s_all * kl_all, cfg.dampening)
    else:
        m_all, damped = np.ones_like(s_all), s_all.copy()

    degenerate = False
    if cfg.renorm == "global":
        final, degenerate = batch_renormalize(damped)
    else:
        final = damped.copy()
        doms = np.array([r[0].domain.value for r in rows])
        for d in np.unique(doms):
            mask = doms == d
            final[mask], deg = batch_renormalize(damped[mask])
            degenerate = degenerate or deg

    records = [
        AdvantageRecord(
            prompt_id=g.prompt_id,
            index=i,
            domain=g.domain,
            reward=float(g.rewards[i]),
            a_grpo=float(a_grpo[g.prompt_id][i]),
            s_scaled=s,
            m=float(m_all[j]),
            a_final=float(final[j]),
            t_domain=t_g,
            t_cluster=t_cg,
            cluster=cid,
        )
        for j, (g, i, t_g, t_cg, cid, s) in enumerate(rows)
    ]
    return ArpoResult(
        records=records,
        skip_report=report,
        lambda_t=lam,
        t_p=t_p,
        domain_stats=domain_stats,
        cluster_stats=cluster_stats,
        degenerate_std=degenerate,
    )
