"""Command-line pipeline: fuse, knn, analyze, select, rank, eval.

Exit codes follow one convention across subcommands: 0 on success
(including a solver run that stops without converging), 1 on domain
errors (mismatched ids, invalid budgets, unknown modes, missing ground
truth), 2 on I/O failures. All outputs are deterministic for a fixed
configuration and seed, independent of the thread count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from hubsel import evaluation, features, neighbors, selector, stats

DEFAULT_K_HUB = 10
DEFAULT_N_LID = 100
DEFAULT_M_DIV = 30

_INIT_NAMES = {"hub-first": "hub_first", "lid-first": "lid_first", "uniform": "uniform"}
_AFFINITY_NAMES = {"dense": "dense", "knn-sparse": "knn_sparse"}


@dataclass
class RunConfig:
    """Validated knob set shared by the pipeline commands."""

    metric: str = "cosine"
    k_hub: int = DEFAULT_K_HUB
    n_lid: int = DEFAULT_N_LID
    m_div: int = DEFAULT_M_DIV
    budget_k: int | None = None
    init: str = "hub-first"
    seed: int = 0
    thread_count: int = 1
    step_rule: str = "derived"

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cfg = cls(
            metric=getattr(args, "metric", "cosine"),
            k_hub=getattr(args, "k_hub", DEFAULT_K_HUB),
            n_lid=getattr(args, "n_lid", DEFAULT_N_LID),
            m_div=getattr(args, "m_div", DEFAULT_M_DIV),
            budget_k=getattr(args, "k", None),
            init=getattr(args, "init", "hub-first"),
            seed=getattr(args, "seed", 0),
            thread_count=getattr(args, "threads", 1),
            step_rule=getattr(args, "step", "derived"),
        )
        if cfg.metric not in neighbors.METRICS:
            raise ValueError(f"unknown metric '{cfg.metric}'")
        for name in ("k_hub", "n_lid", "m_div"):
            if getattr(cfg, name) < 1:
                raise ValueError(f"{name.replace('_', '-')} must be positive")
        if cfg.thread_count < 1:
            raise ValueError("threads must be positive")
        if cfg.init not in _INIT_NAMES:
            raise ValueError(f"unknown init '{cfg.init}'")
        if cfg.step_rule not in ("derived", "paper"):
            raise ValueError(f"unknown step rule '{cfg.step_rule}'")
        return cfg

    @property
    def graph_k(self) -> int:
        # one graph is built wide enough for hubness, lid, and diversity
        return max(self.k_hub, self.n_lid + 1, self.m_div)


def _build_graph(m, cfg: RunConfig) -> neighbors.NeighborGraph:
    return neighbors.knn_graph(
        m, min(cfg.graph_k, m.n - 1), metric=cfg.metric, threads=cfg.thread_count
    )


def _cached_graph(m, cfg: RunConfig, feature_path, out_dir: Path) -> neighbors.NeighborGraph:
    digest = hashlib.sha256(Path(feature_path).read_bytes()).hexdigest()[:12]
    kmax = min(cfg.graph_k, m.n - 1)
    cache = out_dir / f"graph_{digest}_{cfg.metric}_k{kmax}.csv"
    if cache.exists():
        return neighbors.load_graph(cache, m.ids, cfg.metric)
    g = _build_graph(m, cfg)
    neighbors.save_graph(g, m.ids, cache)
    return g


def cmd_fuse(args) -> int:
    mats = [features.load_features(p) for p in args.inputs]
    fused = features.fuse(mats)
    features.save_features(fused, args.out)
    print(f"fused {len(mats)} matrices: {fused.n} fragments x {fused.d} dims -> {args.out}")
    return 0


def cmd_knn(args) -> int:
    cfg = RunConfig.from_args(args)
    if args.k < 1:
        raise ValueError(f"invalid neighbor count k = {args.k}")
    m = features.load_features(args.features)
    g = neighbors.knn_graph(m, args.k, metric=cfg.metric, threads=cfg.thread_count)
    neighbors.save_graph(g, m.ids, args.out)
    print(f"knn graph: {g.n} fragments, {g.indices.shape[1]} neighbors -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    cfg = RunConfig.from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = features.load_features(args.features)
    g = _cached_graph(m, cfg, args.features, out_dir)
    profile = stats.compute_profile(m, g, k_hub=cfg.k_hub, n_lid=cfg.n_lid, m_div=cfg.m_div)
    stats.save_profile_csv(profile, out_dir / "profile.csv")
    stats.save_summary_json(profile, out_dir / "summary.json")
    stats.save_scatter_csv(profile, out_dir / "scatter.csv")
    print(json.dumps(stats.summarize(profile), indent=2))
    return 0


def _profile_for(m, cfg: RunConfig, args):
    """Profile from --profiles when given, else computed on the fly."""
    graph = None
    if getattr(args, "profiles", None):
        profile = stats.load_profile_csv(args.profiles)
        if profile.ids != m.ids:
            raise ValueError(
                f"profile ids do not match feature ids ({args.profiles})"
            )
    else:
        graph = _build_graph(m, cfg)
        profile = stats.compute_profile(m, g=graph, k_hub=cfg.k_hub, n_lid=cfg.n_lid, m_div=cfg.m_div)
    return profile, graph


def cmd_select(args) -> int:
    cfg = RunConfig.from_args(args)
    m = features.load_features(args.features)
    profile, graph = _profile_for(m, cfg, args)
    affinity = _AFFINITY_NAMES.get(args.mode)
    if affinity is None:
        raise ValueError(f"unknown affinity mode '{args.mode}'")
    if affinity == "knn_sparse" and graph is None:
        graph = _build_graph(m, cfg)
    problem = selector.build_problem(
        profile.hubness,
        profile.lid,
        m,
        metric=cfg.metric,
        k=args.k,
        mode=affinity,
        graph=graph,
        linear=args.linear,
    )
    solver_cfg = selector.SolverConfig(
        init=_INIT_NAMES[cfg.init],
        step_rule=cfg.step_rule,
        max_iterations=args.max_iter,
    )
    y, trace = selector.solve(problem, solver_cfg)
    selector.save_solution(args.out, m.ids, problem, y, trace, init_label=cfg.init)
    if args.trace:
        selector.save_trace(args.trace, trace)
    for i in selector.round_selection(y, problem):
        print(m.ids[i])
    return 0


def cmd_rank(args) -> int:
    cfg = RunConfig.from_args(args)
    mode = args.mode
    if mode in evaluation.BASELINE_MODES:
        if not args.profiles:
            raise ValueError(f"mode '{mode}' requires --profiles")
        profile = stats.load_profile_csv(args.profiles)
        scores = evaluation.load_scores(args.scores) if args.scores else None
        ranking = evaluation.baseline_rank(
            profile, mode, seed=cfg.seed, scores=scores, query_id=args.query_id
        )
    elif mode in ("hub-first", "lid-first"):
        if not args.features or args.k is None:
            raise ValueError(f"mode '{mode}' requires --features and --k")
        m = features.load_features(args.features)
        profile, graph = _profile_for(m, cfg, args)
        affinity = _AFFINITY_NAMES.get(args.affinity)
        if affinity is None:
            raise ValueError(f"unknown affinity mode '{args.affinity}'")
        if affinity == "knn_sparse" and graph is None:
            graph = _build_graph(m, cfg)
        problem = selector.build_problem(
            profile.hubness, profile.lid, m,
            metric=cfg.metric, k=args.k, mode=affinity, graph=graph,
        )
        solver_cfg = selector.SolverConfig(
            init=_INIT_NAMES[mode], step_rule=cfg.step_rule
        )
        y, _ = selector.solve(problem, solver_cfg)
        order = selector.ranking_order(y, problem)
        ranking = evaluation.Ranking(
            query_id=args.query_id, items=[m.ids[i] for i in order]
        )
    else:
        raise ValueError(f"unknown mode '{mode}'")
    evaluation.save_run(args.out, ranking)
    print(f"ranked {len(ranking.items)} fragments ({mode}) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    runs = evaluation.load_run(args.run)
    if args.kind == "map":
        if not args.gt:
            raise ValueError("kind 'map' requires --gt")
        gt = evaluation.load_ground_truth(args.gt)
        per_query = {}
        for r in runs:
            if r.query_id not in gt:
                raise ValueError(f"missing ground truth for query '{r.query_id}'")
            per_query[r.query_id] = evaluation.average_precision_at_k(
                r, gt[r.query_id], args.depth
            )
        report = {
            "K": args.depth,
            "per_query": per_query,
            "map": sum(per_query.values()) / len(per_query),
        }
    else:
        if not args.scores:
            raise ValueError("kind 'subjective' requires --scores")
        scores = evaluation.load_scores(args.scores)
        vals = [evaluation.mean_subjective_at_k(r, scores, args.depth) for r in runs]
        report = {"K": args.depth, "mean_subjective": sum(vals) / len(vals)}
    print(json.dumps(report, indent=2))
    if args.out:
        evaluation.save_report(args.out, report)
    return 0


def _add_common(sub, *, threads: bool = True) -> None:
    sub.add_argument("--metric", choices=list(neighbors.METRICS), default="cosine")
    if threads:
        sub.add_argument("--threads", type=int, default=1)


def _add_profile_knobs(sub) -> None:
    sub.add_argument("--k-hub", dest="k_hub", type=int, default=DEFAULT_K_HUB,
                     help="neighbors for hubness scores")
    sub.add_argument("--n-lid", dest="n_lid", type=int, default=DEFAULT_N_LID,
                     help="sample size of the lid estimator")
    sub.add_argument("--m-div", dest="m_div", type=int, default=DEFAULT_M_DIV,
                     help="neighbors for the diversity score")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hubsel",
        description="Profile feature collections and select popular, low-risk, diverse fragments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("fuse", help="L2-normalize and concatenate feature matrices")
    p.add_argument("inputs", nargs="+", help="feature files (csv or fbin)")
    p.add_argument("--out", required=True, help="fused output file")
    p.set_defaults(func=cmd_fuse)

    p = subs.add_parser("knn", help="build an exact kNN graph")
    p.add_argument("features")
    p.add_argument("--k", type=int, required=True, help="neighbors per fragment")
    p.add_argument("--out", required=True, help="graph csv")
    _add_common(p)
    p.set_defaults(func=cmd_knn)

    p = subs.add_parser("analyze", help="hubness / lid / diversity profile of a collection")
    p.add_argument("features")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    _add_profile_knobs(p)
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("select", help="solve the budgeted selection problem")
    p.add_argument("features")
    p.add_argument("--k", type=int, required=True, help="selection budget")
    p.add_argument("--out", required=True, help="solution json")
    p.add_argument("--profiles", help="profile csv from analyze (else computed on the fly)")
    p.add_argument("--init", choices=sorted(_INIT_NAMES), default="hub-first")
    p.add_argument("--step", choices=["derived", "paper"], default="derived")
    p.add_argument("--mode", default="dense", help="affinity mode: dense or knn-sparse")
    p.add_argument("--trace", help="optional per-iteration trace csv")
    p.add_argument("--linear", action="store_true",
                   help="drop the quadratic term (allows k = 1)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    _add_common(p)
    _add_profile_knobs(p)
    p.set_defaults(func=cmd_select)

    p = subs.add_parser("rank", help="rank all fragments with a baseline or the solver")
    p.add_argument("--mode", required=True,
                   help="hub | lid | random | oracle | hub-first | lid-first")
    p.add_argument("--out", required=True, help="run csv")
    p.add_argument("--profiles", help="profile csv (baseline modes)")
    p.add_argument("--scores", help="subjective scores csv (oracle mode)")
    p.add_argument("--features", help="feature file (solver modes)")
    p.add_argument("--k", type=int, default=None, help="budget (solver modes)")
    p.add_argument("--affinity", default="dense", help="dense or knn-sparse (solver modes)")
    p.add_argument("--step", choices=["derived", "paper"], default="derived")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--query-id", dest="query_id", default="all")
    _add_common(p)
    _add_profile_knobs(p)
    p.set_defaults(func=cmd_rank)

    p = subs.add_parser("eval", help="score a run file")
    p.add_argument("--run", required=True, help="run csv to score")
    p.add_argument("--kind", choices=["map", "subjective"], default="map")
    p.add_argument("--gt", help="ground truth csv (map)")
    p.add_argument("--scores", help="subjective scores csv (subjective)")
    p.add_argument("--depth", type=int, default=10, help="evaluation cutoff K")
    p.add_argument("--out", help="optional report json")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
