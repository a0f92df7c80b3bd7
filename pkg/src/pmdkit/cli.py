"""Command-line entry point.

Reports go to --out (or stdout) as canonical JSON, JSON lines or CSV;
short human summaries go to stderr.  Exit codes: 0 success, 2 invalid
input or configuration, 3 search found nothing (infeasible, exhausted).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import anon_games, clt, cover, fourier_learn, gaussian, moments
from .errors import BadConfig, PmdError, SearchError, UnknownCommand, ValidationError
from .pmd_core import (
    DEFAULT_SUPPORT_CAP,
    LatticeDistribution,
    SampleBatch,
    dumps,
    exact_pmf,
    params_from_json,
    sample_pmd,
    tv_distance,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SEARCH = 3


@dataclass(frozen=True)
class RunConfig:
    seed: int
    mc_budget: int
    cap: int
    out: Path | None

    def __post_init__(self):
        if self.mc_budget < 1:
            raise BadConfig("--budget must be positive")
        if self.cap < 1:
            raise BadConfig("--cap must be positive")


def _load(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise BadConfig(f"cannot read {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _emit(cfg: RunConfig, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _samples(path: str) -> SampleBatch:
    data = _load(path)
    try:
        return SampleBatch.from_json(data)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed sample JSON: {exc}") from exc


# ------------------------------------------------------------ commands


def cmd_pmf(args, cfg):
    dist = exact_pmf(params_from_json(_load(args.params)), cfg.cap)
    _emit(cfg, dumps(dist.to_records()))


def cmd_sample(args, cfg):
    batch = sample_pmd(params_from_json(_load(args.params)), args.count, cfg.seed)
    _emit(cfg, dumps(batch.to_json()))


def _distribution(path: str, cap: int) -> LatticeDistribution:
    data = _load(path)
    if isinstance(data, dict) and "rows" in data:
        return exact_pmf(params_from_json(data), cap)
    try:
        return LatticeDistribution.from_records(data)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed distribution JSON: {exc}") from exc


def cmd_tv(args, cfg):
    tv = tv_distance(_distribution(args.a, cfg.cap), _distribution(args.b, cfg.cap))
    _emit(cfg, dumps({"tv": tv}))


def cmd_moments(args, cfg):
    params = params_from_json(_load(args.params))
    alpha = [int(x) for x in args.alpha.split(",")]
    report = {
        "alpha": alpha,
        "moment": moments.raw_moment(exact_pmf(params, cfg.cap), alpha),
        "elementary": moments.elementary_multisym(params, alpha),
        "power_sum": moments.power_sum(params, alpha),
    }
    _emit(cfg, dumps(report))


def cmd_gauss_tv(args, cfg):
    g1 = gaussian.GaussianParams.from_json(_load(args.a))
    g2 = gaussian.GaussianParams.from_json(_load(args.b))
    cert = gaussian.tv_bound_spectral(g1, g2, args.eps)
    tv, hw = gaussian.mc_tv_gaussians(g1, g2, cfg.mc_budget, cfg.seed)
    report = {"certificate": cert.to_json(), "kl": gaussian.kl_gaussians(g1, g2), "mc_tv": tv,
              "half_width": hw, "mc_budget": cfg.mc_budget, "seed": cfg.seed}
    _emit(cfg, dumps(report))


def cmd_gauss_sample(args, cfg):
    g = gaussian.GaussianParams.from_json(_load(args.params))
    _emit(cfg, dumps(gaussian.sample_discretized(g, args.count, cfg.seed).to_json()))


def cmd_clt_check(args, cfg):
    params = params_from_json(_load(args.params))
    report = clt.clt_experiment(params, cfg.mc_budget, cfg.seed, args.C, cfg.cap)
    _note(f"n={report.n} k={report.k} tv={report.empirical_tv:.3g} +- {report.half_width:.2g}")
    _emit(cfg, dumps(report.to_json()))


def cmd_clt_sweep(args, cfg):
    from .plotting import plot_clt_sweep

    ns = [int(x) for x in args.ns.split(",")]
    reports = clt.clt_sweep(ns, args.p, cfg.mc_budget, cfg.seed, args.C)
    _emit(cfg, clt.sweep_csv(reports))
    if args.plot:
        _note(f"figure written to {plot_clt_sweep(reports, args.plot)}")


def _cover_config(args) -> cover.GaussianCoverConfig:
    return cover.GaussianCoverConfig(mean_step=args.mean_step, weight_step=args.weight_step,
                                     min_block_eig=args.min_block_eig, cap=args.cap)


def cmd_cover(args, cfg):
    if args.action == "enumerate":
        if args.kind == "gaussian":
            stream = (cover.CoverElement(g, None, {"index": i}) for i, g in
                      enumerate(cover.enumerate_gaussian_cover(args.n, args.k, args.eps, _cover_config(args))))
        else:
            stream = (cover.CoverElement(None, p, {"index": i}) for i, p in
                      enumerate(cover.enumerate_sparse_cover(args.n, args.k, args.eps, args.step, args.cap)))
        lines = [dumps(e.to_json()) for e in stream]
        _note(f"{len(lines)} cover elements")
        _emit(cfg, "\n".join(lines))
    else:
        element = cover.CoverElement.from_json(_load(args.input))
        n = args.n if args.n is not None else element.n
        params = cover.properize(element, n, args.eps, args.min_block_eig or 0.0)
        _emit(cfg, dumps(params.to_json()))


def cmd_learn(args, cfg):
    config = fourier_learn.LearnConfig(seed=cfg.seed, v1_step=args.v1_step, v2_step=args.v2_step)
    h = fourier_learn.learn_pmd(_samples(args.samples), args.k, args.eps, config)
    _note(f"winner {h.provenance.get('guess')} among {h.provenance.get('candidates')} candidates")
    _emit(cfg, dumps(h.to_json()))


def cmd_hypothesis(args, cfg):
    h = fourier_learn.LearnedHypothesis.from_json(_load(args.input))
    _emit(cfg, dumps(fourier_learn.sample_hypothesis(h, args.count, cfg.seed).to_json()))


def cmd_anon(args, cfg):
    game = anon_games.AnonymousGame.from_json(_load(args.game))
    if args.action == "solve":
        caps = anon_games.SolverCaps(sparse_denominator=args.cap_sparse, gaussian_denominator=args.cap_gauss,
                                     sparse_budget=args.sparse_budget, power_order=args.power_order,
                                     max_statistics=args.cap_stats)
        res = anon_games.ptas_search(game, args.eps, caps, cfg.seed)
        _note(f"verified after {res.statistics_tried} statistics, regret {res.regret:.4g}")
        report = {"profile": res.profile.to_json(), "regret": res.regret, "eps": args.eps, "tags": list(res.tags),
                  "statistic": res.statistic.to_json(), "statistics_tried": res.statistics_tried, "seed": cfg.seed}
    else:
        rho = anon_games.MixedProfile.from_json(_load(args.profile))
        r = anon_games.max_regret(game, rho)
        report = {"regret": r, "eps": args.eps, "is_eps_nash": r <= args.eps + anon_games.REGRET_TOL}
    _emit(cfg, dumps(report))


# -------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadConfig(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=100_000, help="Monte-Carlo budget")
    common.add_argument("--cap", type=int, default=DEFAULT_SUPPORT_CAP, help="support or stream size cap")
    common.add_argument("--out", type=Path, default=None)

    parser = _Parser(prog="pmdkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("pmf", parents=[common], help="exact PMF of a PMD")
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("sample", parents=[common], help="draw PMD samples")
    p.add_argument("--params", required=True)
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("tv", parents=[common], help="TV distance of two PMDs or PMFs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("moments", parents=[common], help="raw moment, elementary and power sums")
    p.add_argument("--params", required=True)
    p.add_argument("--alpha", required=True, help="comma-separated multi-index")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("gauss-tv", parents=[common], help="TV certificate and MC estimate for two Gaussians")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--eps", type=float, default=0.1)
    p.set_defaults(func=cmd_gauss_tv)

    p = sub.add_parser("gauss-sample", parents=[common], help="samples of a rounded Gaussian")
    p.add_argument("--params", required=True)
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_gauss_sample)

    p = sub.add_parser("clt-check", parents=[common], help="PMD vs moment-matched rounded Gaussian")
    p.add_argument("--params", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.set_defaults(func=cmd_clt_check)

    p = sub.add_parser("clt-sweep", parents=[common], help="CLT check over binomial sizes, CSV + PNG")
    p.add_argument("--ns", default="100,400,1600")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--plot", type=Path, default=None, help="PNG path")
    p.set_defaults(func=cmd_clt_sweep)

    p = sub.add_parser("cover", parents=[common], help="enumerate or properize cover elements")
    p.add_argument("action", choices=["enumerate", "properize"])
    p.add_argument("--kind", choices=["gaussian", "sparse"], default="gaussian")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--step", type=float, default=None, help="sparse grid step")
    p.add_argument("--mean-step", type=float, default=None)
    p.add_argument("--weight-step", type=float, default=None)
    p.add_argument("--min-block-eig", type=float, default=None)
    p.add_argument("--in", dest="input")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("learn", parents=[common], help="learn a PMD from samples")
    p.add_argument("--samples", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--v1-step", type=float, default=None)
    p.add_argument("--v2-step", type=float, default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("hypothesis", parents=[common], help="sample a learned hypothesis")
    p.add_argument("action", choices=["sample"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_hypothesis)

    p = sub.add_parser("anon", parents=[common], help="anonymous game solver and checker")
    p.add_argument("action", choices=["solve", "verify"])
    p.add_argument("--game", required=True)
    p.add_argument("--profile")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--cap-sparse", type=int, default=None, help="sparse lattice denominator")
    p.add_argument("--cap-gauss", type=int, default=None, help="Gaussian lattice denominator")
    p.add_argument("--cap-stats", type=int, default=None, help="maximum statistics to try")
    p.add_argument("--sparse-budget", type=int, default=None)
    p.add_argument("--power-order", type=int, default=None)
    p.set_defaults(func=cmd_anon)
    return parser


def _validate(args) -> None:
    if args.command == "cover":
        if args.action == "enumerate" and (args.n is None or args.k is None):
            raise BadConfig("cover enumerate needs --n and --k")
        if args.action == "properize" and not args.input:
            raise BadConfig("cover properize needs --in")
    if args.command == "anon" and args.action == "verify" and not args.profile:
        raise BadConfig("anon verify needs --profile")


def dispatch(argv: Sequence[str]) -> int:
    try:
        parser = build_parser()
        if argv and not argv[0].startswith("-") and argv[0] not in parser._subparsers._group_actions[0].choices:
            raise UnknownCommand(f"unknown command {argv[0]!r}")
        args = parser.parse_args(list(argv))
        if args.command is None:
            raise UnknownCommand("no command given")
        _validate(args)
        cfg = RunConfig(args.seed, args.budget, args.cap, args.out)
        args.func(args, cfg)
        return EXIT_OK
    except SearchError as exc:
        _note(f"error: {type(exc).__name__}: {exc}")
        return EXIT_SEARCH
    except (PmdError, ValueError) as exc:
        _note(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INVALID


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return dispatch(sys.argv[1:] if argv is None else argv)
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
