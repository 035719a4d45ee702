"""Experiment harness: run simulators, compare with exact laws, report.

Monte Carlo experiments split their replicates into fixed-size chunks, each
simulated on its own seeded stream (see :class:`lpatlift._rng.RngSpec`).
Chunk results are combined in chunk order, so a report depends on the seed
and the configuration but not on how many workers ran the chunks.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Hashable, Iterable, Mapping, Optional

import numpy as np
from scipy import stats

from lpatlift import __version__
from lpatlift._rng import RngSpec, Stream
from lpatlift.coalescent import (
    _Jumps,
    display_discrepancies,
    lifted_rate_rational,
    lifted_rate_table,
    merger_size_pmf,
    parse_lambda,
    rate_arcsine_rational,
    rate_table,
    simulate_lambda_coalescent,
    time_change_factor,
)
from lpatlift.crp_gem import block_one_jump_log, gem_sticks_array, root_partition, sample_crp
from lpatlift.exact_oracle import (
    OracleRangeError,
    crp_law,
    exact_first_jump_law,
    exact_first_transition,
    root_partition_consistency,
    root_partition_matches_crp,
    verify_lemma1,
)
from lpatlift.lifting import sample_lift, simulate_lift_chain
from lpatlift.partitions import Partition, relabel, to_text
from lpatlift.port_trees import encode, iter_ports, restrict_tree, sample_lpat

DEFAULT_SEED = 12345


class UnknownExperiment(KeyError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    n: Optional[int] = None
    lam: str = "arcsine"
    replicates: Optional[int] = None
    seed: int = DEFAULT_SEED
    horizon: Optional[float] = None
    threads: int = 1
    threshold: Optional[float] = None

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise UnknownExperiment(self.name)
        if self.replicates is not None and self.replicates < 1:
            raise ValueError("replicate count must be at least 1")

    def resolved(self) -> ExperimentConfig:
        d = DEFAULTS[self.name]
        return ExperimentConfig(
            self.name,
            self.n if self.n is not None else d.get("n"),
            self.lam,
            self.replicates if self.replicates is not None else d.get("replicates"),
            self.seed,
            self.horizon,
            self.threads,
            self.threshold if self.threshold is not None else d.get("threshold"),
        )


@dataclass
class ComparisonReport:
    experiment: str
    check: str
    params: dict
    passed: bool
    expected: dict = field(default_factory=dict)
    empirical: dict = field(default_factory=dict)
    tv: Optional[float] = None
    z_scores: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    rng: Optional[dict] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def as_dict(self) -> dict:
        return jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))


def jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return {"fraction": f"{x.numerator}/{x.denominator}", "float": float(x)}
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def reports_csv(reports: Iterable[ComparisonReport]) -> str:
    lines = ["experiment,check,passed,tv,statistics,thresholds"]
    for r in reports:
        st = ";".join(f"{k}={v!r}" for k, v in sorted(r.statistics.items()))
        th = ";".join(f"{k}={v!r}" for k, v in sorted(r.thresholds.items()))
        tv = "" if r.tv is None else repr(r.tv)
        lines.append(f"{r.experiment},{r.check},{int(r.passed)},{tv},{st},{th}")
    return "\n".join(lines) + "\n"


# -- statistics ------------------------------------------------------------------


def empirical_pmf(samples: Iterable[Hashable]) -> dict:
    counts = Counter(samples)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("empirical_pmf needs at least one sample")
    return {k: Fraction(c, total) for k, c in sorted(counts.items(), key=lambda kv: str(kv[0]))}


def tv_distance(p: Mapping, q: Mapping) -> float:
    """Half the L1 distance; keys missing from one side count as zero."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)


def _normalise(counts: Mapping) -> dict:
    total = sum(counts.values())
    return {k: c / total for k, c in counts.items()}


def multinomial_noise(expected: Mapping, n: int) -> dict:
    """Scale of TV noise for ``n`` multinomial draws from ``expected``.

    ``mean`` is the normal-approximation mean of the TV distance and
    ``cell_3sigma`` adds up three standard deviations per cell.
    """
    p = np.array([float(v) for v in expected.values()])
    sd = np.sqrt(p * (1 - p) / n)
    return {"tv_mean": float(0.5 * np.sum(sd) * math.sqrt(2 / math.pi)), "tv_cell_3sigma": float(1.5 * np.sum(sd))}


def z_scores(counts: Mapping, expected: Mapping, n: int) -> dict:
    out = {}
    for k, p in expected.items():
        p = float(p)
        sd = math.sqrt(n * p * (1 - p)) if 0 < p < 1 else 0.0
        c = counts.get(k, 0)
        out[k] = (c - n * p) / sd if sd > 0 else (0.0 if c == n * p else math.inf)
    return out


def _compare(
    experiment: str,
    check: str,
    params: dict,
    counts: Counter,
    expected: Mapping,
    threshold: float,
    rng: RngSpec,
) -> ComparisonReport:
    n = sum(counts.values())
    tv = tv_distance(_normalise(counts), expected)
    return ComparisonReport(
        experiment,
        check,
        params,
        passed=tv <= threshold,
        expected=dict(sorted(expected.items())),
        empirical=dict(sorted(counts.items())),
        tv=tv,
        z_scores={k: round(v, 6) for k, v in sorted(z_scores(counts, expected, n).items())},
        statistics=multinomial_noise(expected, n),
        thresholds={"tv": threshold},
        rng=rng.as_dict(),
    )


# -- fan-out -------------------------------------------------------------------------


def _run_chunk(task):
    worker, seed, chunk, count, params = task
    return worker(Stream(seed, (chunk,)), count, params)


def fan_out(worker: Callable, config: ExperimentConfig, params: dict) -> tuple[list, RngSpec]:
    """Run ``worker(stream, count, params)`` over all replicate chunks and
    return the chunk results in chunk order."""
    spec = RngSpec(config.seed)
    tasks = [(worker, spec.seed, c, hi - lo, params) for c, lo, hi in spec.chunks(config.replicates)]
    if config.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as ex:
            results = list(ex.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]
    return results, spec


def _sum_counters(results: Iterable[Counter]) -> Counter:
    total: Counter = Counter()
    for c in results:
        total.update(c)
    return total


# -- workers (top level so that process pools can pickle them) ------------------------


def _w_lpat(stream, count, params):
    n = params["n"]
    full, restricted = Counter(), Counter()
    for _ in range(count):
        t = sample_lpat(n, stream)
        full[encode(t)] += 1
        restricted[encode(restrict_tree(t, n - 1))] += 1
    return full, restricted


def _w_first_lift(stream, count, params):
    n = params["n"]
    sizes, parts = Counter(), Counter()
    for _ in range(count):
        traj = simulate_lift_chain(sample_lpat(n, stream), stream, max_merges=1)
        sizes[traj.events[-1].merged_block_count] += 1
        parts[to_text(traj.states[0][1])] += 1
    return sizes, parts


def _w_single_lift(stream, count, params):
    # a fresh tree for every attempt; attempts that pick a leaf are discarded
    n = params["n"]
    sizes = Counter()
    for _ in range(count):
        while True:
            ev = sample_lift(sample_lpat(n, stream), stream)
            if not ev.is_null:
                break
        sizes[ev.merged_block_count] += 1
    return sizes


def _w_first_coalescent(stream, count, params):
    n = params["n"]
    jumps = _Jumps(rate_table(parse_lambda(params["lam"]), n))
    sizes, parts = Counter(), Counter()
    for _ in range(count):
        traj = simulate_lambda_coalescent(n, None, stream, max_mergers=1, _jumps=jumps)
        sizes[traj.merger_sizes[0]] += 1
        parts[to_text(traj.states[0][1])] += 1
    return sizes, parts


def _w_crp(stream, count, params):
    n = params["n"]
    tree_law, crp = Counter(), Counter()
    for _ in range(count):
        tree_law[to_text(relabel(root_partition(sample_lpat(n, stream)), -1))] += 1
        crp[to_text(sample_crp(n - 1, 0.5, 0.5, stream))] += 1
    return tree_law, crp


def _w_gem(stream, count, params):
    return gem_sticks_array(2, params["alpha"], params["theta"], count, stream)


def _w_block_one(stream, count, params):
    n = params["n"]
    out = []
    for _ in range(count):
        log = block_one_jump_log(simulate_lift_chain(sample_lpat(n, stream), stream), n)
        out.append(log[0][0])
    return out


# -- experiments ---------------------------------------------------------------------


def _exp_conditional_uniformity(cfg: ExperimentConfig) -> list[ComparisonReport]:
    res = verify_lemma1(cfg.n)
    failing = [c["label_set"] for c in res["label_sets"] if not c["passed"]]
    return [
        ComparisonReport(
            "lemma1",
            f"conditional-uniformity-n{cfg.n}",
            {"n": cfg.n},
            res["passed"],
            expected={c["label_set"]: c["expected"] for c in res["label_sets"]},
            empirical={c["label_set"]: c["conditional"] for c in res["label_sets"]},
            statistics={"label_sets": len(res["label_sets"]), "failing": len(failing)},
            details={"failing_label_sets": failing},
        )
    ]


def _exp_rates_exact(cfg: ExperimentConfig) -> list[ComparisonReport]:
    out = []
    for n in range(2, cfg.n + 1):
        res = exact_first_transition(n)
        formula = {k: lifted_rate_rational(n, k) for k in range(2, n + 1)}
        via_arcsine = {k: time_change_factor(n) * rate_arcsine_rational(n, k) for k in range(2, n + 1)}
        ok = (
            res["rates"] == formula == via_arcsine
            and res["same_rate_for_every_set"]
            and res["total"] == res["expected_internal_nodes"]
        )
        out.append(
            ComparisonReport(
                "rates-exact",
                f"first-transition-n{n}",
                {"n": n},
                ok,
                expected=formula,
                empirical=res["rates"],
                details={
                    "time_changed_arcsine": via_arcsine,
                    "total_rate": res["total"],
                    "expected_internal_nodes": res["expected_internal_nodes"],
                    "same_rate_for_every_set": res["same_rate_for_every_set"],
                },
            )
        )
    return out


def _exp_lpat_uniformity(cfg: ExperimentConfig) -> list[ComparisonReport]:
    n = cfg.n
    results, spec = fan_out(_w_lpat, cfg, {"n": n})
    full = _sum_counters(r[0] for r in results)
    restricted = _sum_counters(r[1] for r in results)
    params = {"n": n, "replicates": cfg.replicates}
    reports = []
    for size, counts, check in ((n, full, f"uniform-on-P{n}"), (n - 1, restricted, f"restriction-uniform-on-P{n - 1}")):
        trees = [encode(t) for t in iter_ports(size)]
        expected = {k: Fraction(1, len(trees)) for k in trees}
        reports.append(_compare("lpat-uniformity", check, params, counts, expected, cfg.threshold, spec))
    return reports


def _exp_first_merger_size(cfg: ExperimentConfig) -> list[ComparisonReport]:
    n = cfg.n
    params = {"n": n, "replicates": cfg.replicates, "lambda": cfg.lam}
    lifted, spec = fan_out(_w_first_lift, cfg, {"n": n})
    coal, _ = fan_out(_w_first_coalescent, cfg, {"n": n, "lam": cfg.lam})
    single, _ = fan_out(_w_single_lift, cfg, {"n": n})
    lifted_pmf = merger_size_pmf(n, lifted_rate_table(n).row(n))
    coal_pmf = merger_size_pmf(n, rate_table(parse_lambda(cfg.lam), n).row(n))
    lifted_counts = _sum_counters(r[0] for r in lifted)
    reports = [
        _compare("first-merger-size", "lifted-chain", params, lifted_counts, lifted_pmf, cfg.threshold, spec),
        _compare("first-merger-size", f"coalescent-{cfg.lam}", params, _sum_counters(r[0] for r in coal), coal_pmf, cfg.threshold, spec),
    ]
    # Diagnostics.  A single lift of a fresh LPAT, given that it is not null,
    # follows the rate formula.  The running chain keeps its tree through null
    # events, so its first merger follows the law found by enumeration instead.
    reports.append(
        _compare("first-merger-size", "single-lift-diagnostic", params, _sum_counters(single), lifted_pmf, cfg.threshold, spec)
    )
    try:
        chain_law = exact_first_jump_law(n)
    except OracleRangeError:
        chain_law = None
    if chain_law is not None:
        r = _compare(
            "first-merger-size", "lifted-chain-vs-enumeration", params, lifted_counts,
            chain_law["merger_size_law"], cfg.threshold, spec,
        )
        r.details = {"tv_enumerated_vs_rate_formula": tv_distance(chain_law["merger_size_law"], lifted_pmf)}
        reports.append(r)
    return reports


def first_jump_law(n: int, rates: Mapping[int, Fraction]) -> dict:
    """Law of the partition after the first merger from singletons."""
    total = sum(math.comb(n, k) * r for k, r in rates.items())
    law = {}
    for k in range(2, n + 1):
        for c in combinations(range(1, n + 1), k):
            blocks = [list(c)] + [[x] for x in range(1, n + 1) if x not in c]
            law[to_text(Partition.from_blocks(blocks))] = rates[k] / total
    return law


def _exp_jump_chain(cfg: ExperimentConfig) -> list[ComparisonReport]:
    n = cfg.n
    params = {"n": n, "replicates": cfg.replicates, "lambda": "arcsine"}
    lifted, spec = fan_out(_w_first_lift, cfg, {"n": n})
    coal, _ = fan_out(_w_first_coalescent, cfg, {"n": n, "lam": "arcsine"})
    a = _sum_counters(r[1] for r in lifted)
    b = _sum_counters(r[1] for r in coal)
    pa, pb = _normalise(a), _normalise(b)
    exact = first_jump_law(n, lifted_rate_table(n).row(n))
    tv = tv_distance(pa, pb)
    z = {}
    for k in sorted(set(a) | set(b)):
        pooled = (a.get(k, 0) + b.get(k, 0)) / (sum(a.values()) + sum(b.values()))
        sd = math.sqrt(pooled * (1 - pooled) * (1 / sum(a.values()) + 1 / sum(b.values())))
        z[k] = round((pa.get(k, 0) - pb.get(k, 0)) / sd, 6) if sd > 0 else 0.0
    noise = multinomial_noise(exact, cfg.replicates)
    stats_extra = {}
    try:
        chain_law = exact_first_jump_law(n)["partition_law"]
        stats_extra = {
            "tv_lifted_vs_enumerated_chain": tv_distance(pa, chain_law),
            "tv_enumerated_chain_vs_exact": tv_distance(chain_law, exact),
        }
    except OracleRangeError:
        pass
    return [
        ComparisonReport(
            "jump-chain-equality",
            "first-jump-partition",
            params,
            tv <= cfg.threshold,
            expected=exact,
            empirical={"lifted": dict(sorted(a.items())), "coalescent": dict(sorted(b.items()))},
            tv=tv,
            z_scores=z,
            statistics={
                "tv_lifted_vs_exact": tv_distance(pa, exact),
                "tv_coalescent_vs_exact": tv_distance(pb, exact),
                "tv_two_sample_mean": noise["tv_mean"] * math.sqrt(2),
                **stats_extra,
            },
            thresholds={"tv": cfg.threshold},
            rng=spec.as_dict(),
        )
    ]


def _exp_crp_law(cfg: ExperimentConfig) -> list[ComparisonReport]:
    n = cfg.n
    reports = []
    for m in range(2, min(n, 7) + 1):
        res = root_partition_matches_crp(m)
        cons = root_partition_consistency(m) if m <= 6 else {"passed": True}
        reports.append(
            ComparisonReport(
                "crp-law",
                f"exact-root-partition-n{m}",
                {"n": m},
                res["passed"] and cons["passed"],
                expected=res["crp_law"],
                empirical=res["tree_law"],
                details={"consistent_with_n_minus_1": cons["passed"]},
            )
        )
    results, spec = fan_out(_w_crp, cfg, {"n": n})
    expected = crp_law(n - 1, Fraction(1, 2), Fraction(1, 2))
    params = {"n": n, "replicates": cfg.replicates}
    tree_counts = _sum_counters(r[0] for r in results)
    crp_counts = _sum_counters(r[1] for r in results)
    reports.append(_compare("crp-law", f"root-partition-mc-n{n}", params, tree_counts, expected, cfg.threshold, spec))
    reports.append(_compare("crp-law", f"crp-sampler-mc-m{n - 1}", params, crp_counts, expected, cfg.threshold, spec))
    return reports


def _exp_gem_moments(cfg: ExperimentConfig) -> list[ComparisonReport]:
    alpha = theta = Fraction(1, 2)
    results, spec = fan_out(_w_gem, cfg, {"alpha": float(alpha), "theta": float(theta)})
    sticks = np.vstack(results)
    # E W_i = (1 - alpha) / (1 + theta + (i - 1) alpha)
    w1 = (1 - alpha) / (1 + theta)
    w2 = (1 - alpha) / (1 + theta + alpha)
    expected = [w1, (1 - w1) * w2]
    reports = []
    for i, e in enumerate(expected):
        col = sticks[:, i]
        mean = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(len(col)))
        z = (mean - float(e)) / se
        reports.append(
            ComparisonReport(
                "gem-moments",
                f"mean-stick-{i + 1}",
                {"alpha": alpha, "theta": theta, "replicates": cfg.replicates},
                abs(z) <= cfg.threshold,
                expected={"mean": e},
                empirical={"mean": mean, "standard_error": se},
                statistics={"z": z},
                thresholds={"abs_z": cfg.threshold},
                rng=spec.as_dict(),
            )
        )
    return reports


def _exp_block_one(cfg: ExperimentConfig) -> list[ComparisonReport]:
    n = cfg.n
    results, spec = fan_out(_w_block_one, cfg, {"n": n})
    x = np.array([v for chunk in results for v in chunk])
    mean = float(x.mean())
    se = 1.0 / math.sqrt(len(x))
    z = (mean - 1.0) / se
    ks = stats.kstest(x, "expon")
    return [
        ComparisonReport(
            "block-one-poisson",
            "first-interarrival-exponential",
            {"n": n, "replicates": cfg.replicates},
            abs(z) <= 3 and ks.pvalue >= cfg.threshold,
            expected={"mean": 1.0},
            empirical={"mean": mean},
            statistics={"z": z, "ks_statistic": float(ks.statistic), "ks_pvalue": float(ks.pvalue)},
            thresholds={"abs_z": 3.0, "ks_pvalue_min": cfg.threshold},
            rng=spec.as_dict(),
        )
    ]


def _exp_display_check(cfg: ExperimentConfig) -> list[ComparisonReport]:
    records = display_discrepancies(cfg.n)
    by_check: dict[str, list[dict]] = {}
    for r in records:
        by_check.setdefault(r["check"], []).append(r)
    reports = []
    for check, rows in sorted(by_check.items()):
        witness = next((r for r in rows if not r["consistent"]), None)
        reports.append(
            ComparisonReport(
                "paper-check",
                check,
                {"n": cfg.n},
                all(r["ratio_matches"] for r in rows),
                expected={"ratio": "1/(b-2)!" if check == "arcsine-rate-display" else "2^(2b-2)"},
                empirical={
                    (f"b={r['b']},k={r['k']}" if "k" in r else f"b={r['b']}"): {
                        "normative": r["normative"],
                        "display": r["display"],
                        "ratio": r["ratio"],
                    }
                    for r in rows
                },
                statistics={"records": len(rows), "discrepant": sum(not r["consistent"] for r in rows)},
                details={"first_witness": witness},
            )
        )
    return reports


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], list[ComparisonReport]]] = {
    "lemma1": _exp_conditional_uniformity,
    "rates-exact": _exp_rates_exact,
    "lpat-uniformity": _exp_lpat_uniformity,
    "first-merger-size": _exp_first_merger_size,
    "jump-chain-equality": _exp_jump_chain,
    "crp-law": _exp_crp_law,
    "gem-moments": _exp_gem_moments,
    "block-one-poisson": _exp_block_one,
    "paper-check": _exp_display_check,
}

DEFAULTS: dict[str, dict] = {
    "lemma1": {"n": 5},
    "rates-exact": {"n": 7},
    "lpat-uniformity": {"n": 4, "replicates": 10**6, "threshold": 0.005},
    "first-merger-size": {"n": 4, "replicates": 10**5, "threshold": 0.01},
    "jump-chain-equality": {"n": 6, "replicates": 10**5, "threshold": 0.02},
    "crp-law": {"n": 8, "replicates": 10**6, "threshold": 0.01},
    "gem-moments": {"replicates": 10**5, "threshold": 3.0},
    "block-one-poisson": {"n": 50, "replicates": 10**4, "threshold": 1e-3},
    "paper-check": {"n": 6},
}


def verify_suite(config: ExperimentConfig) -> list[ComparisonReport]:
    if config.name not in EXPERIMENTS:
        raise UnknownExperiment(config.name)
    return EXPERIMENTS[config.name](config.resolved())


def header(config: ExperimentConfig) -> dict:
    cfg = config.resolved()
    params = {k: v for k, v in asdict(cfg).items() if k != "threads"}
    return {"type": "header", "version": __version__, "rng": RngSpec(cfg.seed).as_dict(), "params": params}
