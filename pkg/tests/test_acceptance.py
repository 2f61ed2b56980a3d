"""Top-level acceptance checks, one test per criterion.

Each test carries an ``acceptance`` marker; ``conftest.py`` prints a
PASS/FAIL line per label at the end of the run.
"""

import json
import math
import time

import numpy as np
import pytest

from arpo.advantage import (
    ArpoConfig,
    DampeningConfig,
    RolloutGroup,
    batch_renormalize,
    compute_arpo,
    domain_temperature,
    grpo_advantages,
    kl_dampen,
    skip_degenerate_groups,
)
from arpo.cli import main
from arpo.geometry import Box2D, bbox_reward, iou
from arpo.kmeans import kmeans
from arpo.rewards import (
    SPATIAL_KINDS,
    CognitiveDomain,
    GroundTruth,
    RewardWeights,
    TaskKind,
    combine,
    parse_response,
    score_counting,
    score_format,
    score_multi_choice,
    score_ordinal,
    score_rollout,
    score_single_choice,
    score_spatial,
    score_triplets,
)
from arpo.sim import (
    EnvConfig,
    TabularPolicy,
    TrainConfig,
    clipped_surrogate,
    clipped_surrogate_grad,
    compare_strategies,
    log_softmax,
    make_env,
    run_training,
    softmax,
)
from arpo.text_metrics import lcs_length, length_penalty, open_ended_reward, rouge_l_f, tokenize
from arpo.vcmn import MetaNetParams, gap, init_params, vcmn_backward, vcmn_forward

from .oracles import best_partition_sse, lcs_brute, raster_iou

DOMAINS = list(CognitiveDomain)


def _report(title, rows):
    print(f"\n[{title}]")
    for row in rows:
        print("  " + row)


def _example_rows():
    """(label, got, expected) for every hand-derived or trivial example row."""
    unit = Box2D(0, 0, 1, 1)
    pred = tokenize("the crop is healthy")
    ref = tokenize("the crop looks healthy")
    doubled_ref = "leaf blight on the lower canopy"
    p_toks, r_toks = tokenize(doubled_ref + " " + doubled_ref), tokenize(doubled_ref)
    # ref is a subsequence of ref+ref and the LCS cannot exceed |ref|
    lcs = len(r_toks)
    prec, rec = lcs / len(p_toks), lcs / len(r_toks)
    half_box = parse_response("[0.5, 0, 1, 1]", TaskKind.Boundary)
    ssc = score_rollout("B", GroundTruth("choice", "B"), TaskKind.SingleChoice)
    sbd = score_rollout("[0.1, 0.1, 0.4, 0.4]", GroundTruth("box", [0.1, 0.1, 0.4, 0.4]), TaskKind.Boundary)
    w = RewardWeights(0.8, 0.1, 0.1)
    rows = [
        ("iou identical", iou(unit, unit), 1.0),
        ("iou touching", iou(Box2D(0, 0, 0.5, 1), Box2D(0.5, 0, 1, 1)), 0.0),
        ("iou half overlap vs raster", iou(unit, Box2D(0.5, 0, 1, 1)), raster_iou([0, 0, 1, 1], [0.5, 0, 1, 1])),
        ("bonus iou 0.6", bbox_reward(Box2D(0, 0, 0.6, 1), unit, "bonus"), 1.0),
        ("bonus iou 0.5", bbox_reward(Box2D(0, 0, 0.5, 1), unit, "bonus"), 0.5),
        ("plain iou 1", bbox_reward(unit, unit, "plain"), 1.0),
        ("tokenize punctuation", float(tokenize("Black Measles Fungus.") == ["black", "measles", "fungus"]), 1.0),
        ("tokenize empty", float(tokenize("") == []), 1.0),
        ("tokenize numbers", float(tokenize("12,200-12,300 m") == ["12", "200", "12", "300", "m"]), 1.0),
        ("lcs identity", lcs_length(list("abc"), list("abc")), 3),
        ("lcs disjoint", lcs_length(["a", "b"], ["c", "d"]), 0),
        ("lcs crop", lcs_length(pred, ref), lcs_brute(pred, ref)),
        ("rouge identity", rouge_l_f(pred, pred), 1.0),
        ("rouge disjoint", rouge_l_f(["a"], ["b"]), 0.0),
        ("rouge crop", rouge_l_f(pred, ref), 0.75),
        ("length penalty equal", length_penalty(4, 4), 1.0),
        ("length penalty long", length_penalty(8, 4), 0.5),
        ("length penalty short", length_penalty(2, 4), 1.0),
        ("open ended identity", open_ended_reward(doubled_ref, doubled_ref), 1.0),
        ("open ended doubled", open_ended_reward(doubled_ref + " " + doubled_ref, doubled_ref), 0.5 * 2 * prec * rec / (prec + rec)),
        ("open ended disjoint", open_ended_reward("sunny weather", doubled_ref), 0.0),
        ("parse letter", float(parse_response("B", TaskKind.SingleChoice).payload == "B"), 1.0),
        ("parse box", float(Box2D.from_seq(parse_response("(0.1, 0.2, 0.5, 0.9)", TaskKind.BBox).payload) == Box2D(0.1, 0.2, 0.5, 0.9)), 1.0),
        ("parse banana", float(parse_response("banana", TaskKind.Counting).parse_ok), 0.0),
        ("single B/B", score_single_choice("B", "B"), 1.0),
        ("single b/B", score_single_choice("b", "B"), 1.0),
        ("single A/B", score_single_choice("A", "B"), 0.0),
        ("count 10/10", score_counting(10, 10), 1.0),
        ("count 8/10", score_counting(8, 10), 0.8),
        ("count 3/0", score_counting(3, 0), 0.0),
        ("multi equal", score_multi_choice({"A", "B"}, {"A", "B"}), 1.0),
        ("multi half", score_multi_choice({"A"}, {"A", "B"}), 0.5),
        ("multi disjoint", score_multi_choice({"C"}, {"A", "B"}), 0.0),
        ("ordinal 3/3", score_ordinal(3, 3, 5), 1.0),
        ("ordinal 2/4", score_ordinal(2, 4, 5), 0.5),
        ("ordinal 0/4", score_ordinal(0, 4, 5), 0.0),
        ("triplets equal", score_triplets({("a", "b", "c")}, {("a", "b", "c")}), 1.0),
        ("triplets partial", score_triplets({("a", "b", "c")}, {("a", "b", "c"), ("d", "e", "f")}), 2 / 3),
        ("triplets disjoint", score_triplets({("x", "y", "z")}, {("a", "b", "c")}), 0.0),
        ("format letter", score_format(parse_response("C", TaskKind.SingleChoice), TaskKind.SingleChoice), 1.0),
        ("format inverted box", score_format(parse_response("(0.6, 0.1, 0.2, 0.9)", TaskKind.BBox), TaskKind.BBox), 0.0),
        ("format bad count", score_format(parse_response("many", TaskKind.Counting), TaskKind.Counting), 0.0),
        ("spatial perfect", score_spatial(parse_response("[0, 0, 1, 1]", TaskKind.Boundary), GroundTruth("box", [0, 0, 1, 1]), TaskKind.Boundary), 1.0),
        ("spatial non-spatial", score_spatial(parse_response("A", TaskKind.SingleChoice), GroundTruth("choice", "A"), TaskKind.SingleChoice), 0.0),
        ("spatial half", score_spatial(half_box, GroundTruth("box", [0, 0, 1, 1]), TaskKind.Boundary), 0.5),
        ("combine 1,.5,1", combine(1, 0.5, 1, w), 0.95),
        ("combine zeros", combine(0, 0, 0, w), 0.0),
        ("combine ones", combine(1, 1, 1, w), 1.0),
        ("rollout single choice", ssc.r_total, 0.9),
        ("rollout single spatial", ssc.r_spatial, 0.0),
        ("rollout boundary", sbd.r_total, 1.0),
    ]
    for kind in TaskKind:
        gt = {
            TaskKind.SingleChoice: GroundTruth("choice", "A"),
            TaskKind.MultiChoice: GroundTruth("letters", ["A"]),
            TaskKind.Counting: GroundTruth("count", 1),
            TaskKind.BBox: GroundTruth("box", [0, 0, 1, 1]),
            TaskKind.Boundary: GroundTruth("box", [0, 0, 1, 1]),
            TaskKind.OpenEnded: GroundTruth("text", "rust"),
            TaskKind.OrdinalShortAnswer: GroundTruth("ordinal", 1, scale=3),
            TaskKind.TripletShortAnswer: GroundTruth("triplets", [("a", "b", "c")]),
        }[kind]
        rows.append((f"garbage {kind.value}", score_rollout("", gt, kind).r_total, 0.0))
    return rows


@pytest.mark.acceptance("reward suite exactness")
def test_reward_suite_exactness():
    t0 = time.perf_counter()
    rows = _example_rows()
    worst = max(abs(float(got) - float(exp)) for _, got, exp in rows)
    bad = [(n, g, e) for n, g, e in rows if abs(float(g) - float(e)) >= 1e-9]

    rng = np.random.default_rng(2026)
    raster_worst = 0.0
    for _ in range(200):
        a = np.sort(rng.integers(0, 1001, size=(2, 2)), axis=1) / 1000
        b = np.sort(rng.integers(0, 1001, size=(2, 2)), axis=1) / 1000
        ba = Box2D(a[0, 0], a[1, 0], a[0, 1], a[1, 1])
        bb = Box2D(b[0, 0], b[1, 0], b[0, 1], b[1, 1])
        raster_worst = max(raster_worst, abs(iou(ba, bb) - raster_iou(ba.as_list(), bb.as_list())))
    elapsed = time.perf_counter() - t0
    _report(
        "reward suite exactness",
        [f"{len(rows)} example rows, worst abs error {worst:.3e}", f"raster oracle worst {raster_worst:.3e} over 200 pairs", f"runtime {elapsed:.2f}s"],
    )
    assert not bad, bad
    assert raster_worst < 2e-3
    assert elapsed < 5.0


@pytest.mark.acceptance("reward weighting per task kind")
def test_reward_weighting_per_kind():
    perfect = {
        TaskKind.SingleChoice: ("C", GroundTruth("choice", "C")),
        TaskKind.MultiChoice: ("A, D", GroundTruth("letters", ["A", "D"])),
        TaskKind.Counting: ("7", GroundTruth("count", 7)),
        TaskKind.BBox: ("[0.2, 0.2, 0.7, 0.9]", GroundTruth("box", [0.2, 0.2, 0.7, 0.9])),
        TaskKind.Boundary: ("[0.0, 0.5, 1.0, 1.0]", GroundTruth("box", [0.0, 0.5, 1.0, 1.0])),
        TaskKind.OpenEnded: ("powdery mildew", GroundTruth("text", "Powdery mildew.")),
        TaskKind.OrdinalShortAnswer: ("2", GroundTruth("ordinal", 2, scale=4)),
        TaskKind.TripletShortAnswer: ("(plot, soil, loam)", GroundTruth("triplets", [("plot", "soil", "loam")])),
    }
    w = RewardWeights(0.8, 0.1, 0.1)
    lines = []
    for kind, (text, gt) in perfect.items():
        total = score_rollout(text, gt, kind, w).r_total
        expected = 1.0 if kind in SPATIAL_KINDS else 0.9
        lines.append(f"{kind.value}: {total!r} (expected {expected})")
        # "exactly" here means equal to the weighted sum evaluated in double precision
        assert total == 0.8 * 1.0 + 0.1 * (1.0 if kind in SPATIAL_KINDS else 0.0) + 0.1 * 1.0
        assert abs(total - expected) < 1e-15
    _report("reward weighting", lines)


@pytest.mark.acceptance("GRPO invariants")
def test_grpo_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        g = int(rng.integers(2, 33))
        r = rng.random(g)
        a = grpo_advantages(r)
        worst = max(worst, abs(a.sum()) / g)
        assert abs(a.sum()) < 1e-9 * g
        assert np.array_equal(grpo_advantages(np.full(g, r[0])), np.zeros(g))
    hand = grpo_advantages([1, 0, 0.5, 0.5], eps=0.0)
    s = math.sqrt(0.125)
    assert np.max(np.abs(hand - [0.5 / s, -0.5 / s, 0, 0])) < 1e-9
    elapsed = time.perf_counter() - t0
    _report("GRPO invariants", [f"max |sum|/G {worst:.3e}", f"hand case {hand.round(5).tolist()}", f"runtime {elapsed:.2f}s"])
    assert elapsed < 5.0


def _random_batch(rng, with_kl=False):
    groups = []
    g = int(rng.integers(2, 9))
    for i in range(int(rng.integers(2, 16))):
        r = rng.random(g)
        r[:2] = (0.0, 1.0)
        kl = rng.random(g) * 0.2 if with_kl else None
        groups.append(RolloutGroup(f"q{i}", DOMAINS[int(rng.integers(4))], rng.permutation(r), kl))
    return groups


@pytest.mark.acceptance("GRPO reduction")
def test_grpo_reduction():
    rng = np.random.default_rng(17)
    spread = 0.0
    for _ in range(100):
        groups = _random_batch(rng)
        res = compute_arpo(groups, 0, ArpoConfig(), total_steps=1000)
        assert res.lambda_t == 0.0
        ref = np.concatenate([grpo_advantages(g.rewards) for g in groups])
        ratio = res.a_final / ref
        assert np.all(ratio > 0)
        spread = max(spread, float(ratio.max() / ratio.min() - 1))
        assert np.allclose(ratio, ratio[0], rtol=1e-12, atol=0)
        assert np.array_equal(np.argsort(res.a_final, kind="stable"), np.argsort(ref, kind="stable"))
    _report("GRPO reduction", [f"100 batches, max relative spread of the shared scalar {spread:.2e}"])


@pytest.mark.acceptance("temperature laws")
def test_temperature_laws():
    eps_t = 1e-6
    ns = np.arange(0, 60)
    mus = np.linspace(0, 1, 41)
    grid = np.array([[domain_temperature(int(n), float(m), eps_t) for m in mus] for n in ns])
    assert np.all(grid >= eps_t)
    assert np.all(np.diff(grid, axis=0) >= 0) and np.all(np.diff(grid, axis=1) >= 0)

    rng = np.random.default_rng(23)
    checked = 0
    for trial in range(300):
        g = int(rng.integers(2, 7))
        base = rng.random(g)
        base[:2] = (0.0, 1.0)
        d1, d2 = rng.choice(4, size=2, replace=False)
        groups = []
        for d in (d1, d2):
            shift = rng.uniform(0, 2)
            n = int(rng.integers(1, 6))
            groups += [RolloutGroup(f"{d}-{i}", DOMAINS[d], rng.permutation(base) + shift) for i in range(n)]
        res = compute_arpo(groups, 0, ArpoConfig(fixed_lambda=1.0, kmeans_seed=trial))
        by = {}
        for r in res.records:
            by.setdefault(r.domain, []).append(r)
        prods = {d: by[d][0].t_domain * by[d][0].t_cluster for d in by}
        for d in by:
            # the comparison needs one temperature product per domain
            if len({r.t_domain * r.t_cluster for r in by[d]}) != 1:
                break
        else:
            da, db = DOMAINS[d1], DOMAINS[d2]
            if prods[da] == prods[db]:
                continue
            lo, hi = (da, db) if prods[da] < prods[db] else (db, da)
            top_lo = max(abs(r.a_final) for r in by[lo])
            top_hi = max(abs(r.a_final) for r in by[hi])
            assert top_lo > top_hi
            checked += 1
    _report("temperature laws", [f"monotone grid {grid.shape}, {checked} two-domain batches compared"])
    assert checked >= 100


@pytest.mark.acceptance("dampening laws")
def test_dampening_laws():
    m, _ = kl_dampen([1.0, 0.25], [0.5, 2.0], DampeningConfig(0.9))
    assert abs(m[0] - 0.5) < 1e-12 and abs(m[1] - 0.5) < 1e-12
    rng = np.random.default_rng(29)
    for _ in range(500):
        n = int(rng.integers(2, 40))
        s = np.round(rng.normal(size=n), 3)
        k = np.round(rng.random(n) * 2, 3) * (rng.random(n) > 0.2)
        m, damped = kl_dampen(s, k)
        prod = s * k
        assert np.all((m > 0) & (m <= 1))
        assert np.array_equal(m == 1.0, prod <= 0)
        order = np.argsort(prod)
        p, mm = prod[order], m[order]
        pos = p > 0
        assert np.all(np.diff(mm[pos])[np.diff(p[pos]) > 0] < 0)
        assert np.array_equal(np.sign(damped), np.sign(s))
    _report("dampening laws", ["worked case m=0.5; 500 random batches satisfy bounds and strict monotonicity"])


@pytest.mark.acceptance("renormalization")
def test_renormalization():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=int(rng.integers(2, 300))) * rng.uniform(1e-3, 1e3) + rng.normal()
        out, degenerate = batch_renormalize(x)
        assert not degenerate
        worst = max(worst, abs(out.std() - 1))
        again, _ = batch_renormalize(out)
        assert np.max(np.abs(again - out)) < 1e-12
    assert worst < 1e-9
    _report("renormalization", [f"max |std-1| {worst:.2e}"])


@pytest.mark.acceptance("skip rule")
def test_skip_rule():
    groups = [
        RolloutGroup("range-0.04", DOMAINS[0], [0.50, 0.54]),
        RolloutGroup("range-0.05", DOMAINS[0], [0.00, 0.05]),
        RolloutGroup("flat", DOMAINS[1], [0.3, 0.3, 0.3]),
    ]
    kept, report = skip_degenerate_groups(groups, 0.05)
    assert [g.prompt_id for g in kept] == ["range-0.05"]
    assert report.skipped == ["range-0.04", "flat"]
    res = compute_arpo(groups, 0)
    assert {r.prompt_id for r in res.records} == {"range-0.05"}
    _report("skip rule", [f"skipped {report.skipped}, kept {[g.prompt_id for g in kept]}"])


@pytest.mark.acceptance("k-means oracle")
def test_kmeans_oracle():
    rng = np.random.default_rng(37)
    for k in (1, 2):
        for trial in range(50):
            n = int(rng.integers(1, 9))
            pts = rng.random((n, 4))
            res = kmeans(pts, k, seed=trial, n_init=10)
            assert abs(res.sse - best_partition_sse(pts, min(k, n))) < 1e-9
            again = kmeans(pts, k, seed=trial, n_init=10)
            assert np.array_equal(res.labels, again.labels) and res.sse == again.sse
    _report("k-means oracle", ["100 trials (k=1,2) match the exhaustive optimum; repeat runs identical"])


@pytest.mark.acceptance("VCMN identity and gradients")
def test_vcmn_identity_and_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(41)
    for i in range(50):
        r = int(rng.choice([1, 2, 4, 8]))
        d = r * int(rng.integers(1, 32 // r + 1))
        x = rng.normal(size=(int(rng.integers(1, 9)), d))
        assert np.array_equal(vcmn_forward(init_params(d, r, seed=i), x), x)

    worst = 0.0
    done = 0
    while done < 20:
        r = int(rng.choice([1, 2, 4]))
        d = r * int(rng.integers(1, 32 // r + 1))
        x = rng.normal(size=(int(rng.integers(1, 9)), d))
        p = MetaNetParams(init_params(d, r, seed=done).w1, rng.normal(size=(d, d // r)), r)
        if np.abs(p.w1 @ gap(x)).min() < 1e-3:
            continue
        g = rng.normal(size=x.shape)
        grads = vcmn_backward(p, x, g)
        for theta, analytic in ((p.w1, grads.dw1), (p.w2, grads.dw2), (x, grads.dx)):
            num = np.zeros_like(theta)
            for idx in np.ndindex(theta.shape):
                orig = theta[idx]
                theta[idx] = orig + 1e-5
                up = float((g * vcmn_forward(p, x)).sum())
                theta[idx] = orig - 1e-5
                down = float((g * vcmn_forward(p, x)).sum())
                theta[idx] = orig
                num[idx] = (up - down) / 2e-5
            rel = np.abs(num - analytic).max() / max(np.abs(num).max(), np.abs(analytic).max(), 1e-12)
            worst = max(worst, rel)
        perm = rng.permutation(len(x))
        assert np.array_equal(vcmn_forward(p, x[perm]), vcmn_forward(p, x)[perm])
        done += 1
    elapsed = time.perf_counter() - t0
    _report("VCMN", [f"worst finite-difference relative error {worst:.2e}", f"runtime {elapsed:.2f}s"])
    assert worst < 1e-5
    assert elapsed < 10.0


@pytest.mark.acceptance("surrogate clipping")
def test_surrogate_clipping():
    adv = 0.7
    assert abs(clipped_surrogate(1.5, adv, 0.2) - 1.2 * adv) < 1e-15

    rng = np.random.default_rng(43)
    for _ in range(100):
        z = rng.normal(size=5)
        acts = rng.integers(5, size=8)
        a = rng.normal(size=8)
        got = clipped_surrogate_grad(z, acts, a, log_softmax(z)[acts], 0.2, 0.0, z)
        pi = softmax(z)
        expected = sum(ai * (np.eye(5)[o] - pi) for o, ai in zip(acts, a)) / 8
        assert np.max(np.abs(got - expected)) < 1e-15

    env = EnvConfig()
    tasks = make_env(env.counts, env.num_actions, env.deceptive_fraction, env.seed, env.hard_domain)
    m = run_training(TrainConfig(kl_coef=1e3), tasks, ArpoConfig(), env.deceptive_logit)
    ref = TabularPolicy.from_tasks(tasks, env.deceptive_logit).probs()
    tv = 0.5 * np.abs(softmax(m.final_logits) - ref).sum(axis=1)
    _report("surrogate clipping", [f"beta=1e3: max total variation to reference {tv.max():.2e} over {len(tasks)} prompts"])
    assert tv.max() < 0.05


@pytest.mark.acceptance("directional rebalancing")
def test_directional_rebalancing():
    env = EnvConfig()
    t0 = time.perf_counter()
    report = compare_strategies(TrainConfig(total_steps=1000), ["GRPO", "ARPO"], [0, 1, 2, 3, 4], env, ArpoConfig())
    elapsed = time.perf_counter() - t0
    grpo = np.array(report.minority_accuracy("GRPO"))
    arpo = np.array(report.minority_accuracy("ARPO"))
    diff = arpo - grpo
    n_pos, n_neg = int((diff > 0).sum()), int((diff < 0).sum())
    # one-sided sign test over non-tied seeds
    n = n_pos + n_neg
    p_sign = sum(math.comb(n, k) for k in range(n_pos, n + 1)) / 2**n if n else 1.0
    _report(
        "directional rebalancing",
        [
            f"minority domain {report.minority_domain}",
            f"GRPO per seed {grpo.round(3).tolist()}",
            f"ARPO per seed {arpo.round(3).tolist()}",
            f"ARPO >= GRPO in {int((diff >= 0).sum())}/5 seeds, mean gap {diff.mean():+.3f}",
            f"sign check: {n_pos} up, {n_neg} down, one-sided p={p_sign:.3f}",
            f"runtime {elapsed:.1f}s",
        ],
    )
    assert int((diff >= 0).sum()) >= 4
    assert diff.mean() >= 0
    assert n_pos >= n_neg
    assert elapsed < 300.0


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


@pytest.mark.acceptance("determinism")
def test_cli_determinism(tmp_path):
    rows = []
    for pid, dom in (("a", "OU"), ("b", "OU"), ("c", "SR"), ("d", "SP")):
        for resp in ("A", "B", "C", "B"):
            rows.append({"prompt_id": pid, "domain": dom, "task_kind": "SingleChoice", "response": resp,
                         "ground_truth": {"type": "choice", "value": "B"}, "kl": 0.05 if resp == "C" else 0.0})
    inp = tmp_path / "rollouts.jsonl"
    _write(inp, rows)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "env": {"counts": {"OU": 6, "SR": 3}},
        "train": {"total_steps": 6, "batch_prompts": 5},
        "seeds": [0, 1, 2],
    }))
    commands = {
        "score": ["score", "--input", str(inp)],
        "advantage": ["advantage", "--input", str(inp), "--step", "1"],
        "report": ["report", "--input", str(inp)],
        "simulate": ["simulate", "--config", str(cfg)],
        "compare": ["compare", "--config", str(cfg)],
    }
    lines = []
    for name, argv in commands.items():
        outputs = []
        for run in range(2):
            out = tmp_path / f"{name}{run}"
            assert main([*argv, "--output", str(out), "--seed", "3"]) == 0
            if out.is_dir():
                outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            else:
                extra = out.with_name(out.name + ".skips.json")
                outputs.append({"out": out.read_bytes(), "skips": extra.read_bytes() if extra.exists() else b""})
        assert outputs[0] == outputs[1], name
        lines.append(f"{name}: {len(outputs[0])} file(s) byte-identical")
    _report("determinism", lines)
