"""Batch command line: scene ingestion, dispatch, CSV reports and rasters.

Every command prints deterministic CSV (12 significant digits, fixed column
order) to standard output.  With ``--out`` the same CSV is written to a file
and a matplotlib figure is rendered alongside it; ``render`` instead treats
``--out`` as the raster path (binary PPM, or PNG).  Exit codes: 0 pass,
1 property failure, 2 reference error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .integrals import level_profile, quasi_integral
from .kr import d_kr_topo_lower, w1_discrete
from .markov import (ContractionViolation, bin_weights, chaos_game,
                     contraction_check, fixed_point, render_density)
from .measures import (check_measure_criteria, check_ssf_axioms,
                       check_superadditivity, check_tm1_sampled)
from .median import gdsm_even, gdsm_measure_1d
from .scenes import Scene, SceneError, load_scene, thread_count
from .transforms import check_it_axioms

PASS, FAIL, REF_ERROR, IO_ERROR = 0, 1, 2, 3


def _fmt(x) -> str:
    return f"{float(x):.12g}"


class Report:
    """Collects CSV lines and an optional figure per command."""

    def __init__(self, verb: str, out_dir: str | None):
        self.verb = verb
        self.out_dir = out_dir
        self.lines: list[str] = []

    def row(self, *cells) -> None:
        self.lines.append(",".join(str(c) for c in cells))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def finish(self, stdout, figure_fn=None) -> None:
        stdout.write(self.text())
        if self.out_dir is None:
            return
        os.makedirs(self.out_dir, exist_ok=True)
        with open(os.path.join(self.out_dir, f"{self.verb}.csv"), "w") as fh:
            fh.write(self.text())
        if figure_fn is not None:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
            fig = figure_fn(plt)
            fig.savefig(os.path.join(self.out_dir, f"{self.verb}.png"),
                        dpi=110)
            plt.close(fig)


def cmd_axioms(scene: Scene, args, report: Report) -> tuple[int, object]:
    name = args.target
    budget = args.budget
    in_measures = name in scene.raw.get("measures", {})
    in_transforms = name in scene.raw.get("transforms", {})
    if not in_measures and not in_transforms:
        raise SceneError(f"unknown axioms target {name!r}")
    ok = True
    if in_measures:
        kind = scene.raw["measures"][name]["kind"]
        if kind in ("diffuse_dtm", "cell_count"):
            mu = scene.measure(name)
            for label, rep in (
                    ("tm1_compact", check_tm1_sampled(mu, budget, scene.seed)),
                    ("superadditive", check_superadditivity(mu, budget, scene.seed)),
                    ("subadditive", check_measure_criteria(mu, budget, scene.seed))):
                report.row(name, label, "pass" if rep.passed else "fail")
                if label != "subadditive":
                    ok &= rep.passed
        else:
            rep = check_ssf_axioms(scene.seed_fn(name), budget, scene.seed)
            for axiom in ("s1", "s2", "s3", "s4", "monotone"):
                hit = [w for w in rep.witnesses if w[0] == axiom]
                report.row(name, axiom, "fail" if hit else "pass")
            ok = rep.passed
    else:
        rep = check_it_axioms(scene.transform(name), budget, scene.seed)
        seen = {w[0] for w in rep.witnesses}
        for axiom in ("IT1", "IT2", "IT3", "IT4", "monotone"):
            report.row(name, axiom, "fail" if axiom in seen else "pass")
        ok = rep.passed
    report.row(name, "all", "pass" if ok else "fail")
    return (PASS if ok else FAIL), None


def cmd_eval(scene: Scene, args, report: Report) -> tuple[int, object]:
    mu = scene.measure(args.measure)
    report.row("measure", "region", "value")
    for rname in args.region:
        report.row(args.measure, rname, _fmt(mu(scene.region(rname))))
    return PASS, None


def cmd_integrate(scene: Scene, args, report: Report) -> tuple[int, object]:
    mu = scene.measure(args.measure)
    f = scene.grid_function(args.function)
    value = quasi_integral(mu, f)
    report.row("measure", "function", "value")
    report.row(args.measure, args.function, _fmt(value))
    prof = level_profile(mu, f)

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.step(prof.thresholds, prof.r1, where="post")
        ax.set_xlabel("threshold")
        ax.set_ylabel("measure of strict superlevel")
        ax.set_title(f"level profile: {args.measure} / {args.function}")
        fig.tight_layout()
        return fig

    return PASS, figure


def cmd_kr(scene: Scene, args, report: Report) -> tuple[int, object]:
    if args.cloud:
        if len(args.cloud) != 2:
            raise SceneError("kr needs exactly two point clouds")
        a, b = (scene.cloud(n) for n in args.cloud)
        res = w1_discrete(a, b)
        report.row("kind", "value", "dual_value", "gap")
        report.row("w1_exact", _fmt(res.value), _fmt(res.dual_value),
                   _fmt(res.gap))
        code = PASS if res.gap <= args.tol else FAIL
        if code == FAIL:
            report.row("error", "certificate_gap_exceeds_tol", _fmt(args.tol), "")

        def figure(plt):
            fig, ax = plt.subplots(figsize=(4.5, 4.5))
            ax.scatter(a.points[:, 0], a.points[:, 1], s=500 * a.weights,
                       alpha=0.6, label=args.cloud[0])
            ax.scatter(b.points[:, 0], b.points[:, 1], s=500 * b.weights,
                       alpha=0.6, label=args.cloud[1], marker="x")
            ax.legend()
            ax.set_title(f"w1 = {res.value:.6g}")
            fig.tight_layout()
            return fig

        return code, figure
    if len(args.measure) != 2:
        raise SceneError("kr needs two measures or two clouds")
    mu, nu = (scene.measure(n) for n in args.measure)
    res = d_kr_topo_lower(mu, nu, restarts=args.restarts, iters=args.iters,
                          seed=scene.seed)
    report.row("kind", "value")
    report.row("kr_lower_bound", _fmt(res.value))

    def figure(plt):
        fig, ax = plt.subplots(figsize=(4.8, 4))
        im = ax.imshow(res.witness.values, origin="lower")
        fig.colorbar(im, ax=ax, label="witness test function")
        ax.set_title(f"KR lower bound {res.value:.6g}")
        fig.tight_layout()
        return fig

    return PASS, figure


def cmd_markov(scene: Scene, args, report: Report) -> tuple[int, object]:
    system = scene.system(args.system)
    if system.backend == "continuous":
        if args.initial:
            start = scene.cloud(args.initial)
        else:
            from .kr import point_cloud
            start = point_cloud([system.transforms[0].fixed_point()])
        try:
            res = fixed_point(system, start, tol=args.tol,
                              max_iter=args.steps)
        except ContractionViolation as exc:
            report.row("error", "contraction_violated", str(exc), "")
            return FAIL, None
        check = contraction_check(system, trials=min(max(args.budget // 8, 8), 50),
                                  seed=scene.seed, support=16,
                                  workers=thread_count())
    else:
        start = scene.measure(args.initial)
        res = fixed_point(system, start, tol=args.tol, max_iter=args.steps,
                          kr_budget=(4, 12), seed=scene.seed)
        check = contraction_check(system, trials=min(max(args.budget // 8, 8), 50),
                                  seed=scene.seed, workers=thread_count())
    report.row("row", "k", "d_k", "method")
    for entry in res.trace:
        report.row("trace", entry.k, _fmt(entry.d), entry.method)
    report.row("summary", "converged" if res.converged else "not_converged",
               res.iterations, _fmt(check.max_ratio))
    code = PASS if res.converged or not args.require_convergence else FAIL

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ks = [t.k for t in res.trace]
        ds = [max(t.d, 1e-300) for t in res.trace]
        ax.semilogy(ks, ds, marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("step distance")
        ax.set_title(f"fixed-point trace: {args.system}")
        fig.tight_layout()
        return fig

    return code, figure


def cmd_median(scene: Scene, args, report: Report) -> tuple[int, object]:
    fam = scene.family(args.family)
    masses = gdsm_measure_1d(fam) if fam.odd else gdsm_even(fam).augmented
    report.row("cell", "mass")
    for j, m in enumerate(masses):
        report.row(j, _fmt(m))

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        centers = [fam.interval.center(j) for j in range(fam.interval.cells)]
        ax.bar(centers, [float(m) for m in masses],
               width=fam.interval.pitch * 0.9)
        ax.set_xlabel("value")
        ax.set_ylabel("mass")
        ax.set_title(f"median distribution: {args.family}")
        fig.tight_layout()
        return fig

    return PASS, figure


def write_ppm(path: str, raster: np.ndarray) -> None:
    h, w = raster.shape
    rgb = np.repeat(raster[:, :, None], 3, axis=2)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def cmd_render(scene: Scene, args, report: Report) -> int:
    system = scene.system(args.system)
    if system.backend != "continuous":
        raise SceneError("render needs an affine system")
    cloud = chaos_game(system, n=args.samples, burn_in=args.burn_in,
                       seed=scene.seed)
    if args.bounds:
        bounds = tuple(args.bounds)
    else:
        lo = cloud.points.min(axis=0)
        hi = cloud.points.max(axis=0)
        pad = 0.02 * max(float((hi - lo).max()), 1e-9)
        bounds = (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)
    raster = render_density(cloud, args.resolution, bounds)
    binned = bin_weights(cloud, args.resolution, bounds).sum() * args.samples
    out = args.out or f"{args.system}.ppm"
    try:
        if out.endswith(".png"):
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
            plt.imsave(out, raster, cmap="gray", vmin=0, vmax=255)
        else:
            write_ppm(out, raster)
    except OSError as exc:
        report.row("error", "unwritable", out, str(exc.errno))
        return IO_ERROR
    report.row("raster", out, args.resolution, _fmt(binned))
    return PASS


def build_parser() -> argparse.ArgumentParser:
    def add_common(p, top: bool) -> None:
        sup = argparse.SUPPRESS
        p.add_argument("--scene", **({"default": None} if top else
                                     {"default": sup}))
        p.add_argument("--seed", type=int, default=None if top else sup)
        p.add_argument("--out", default=None if top else sup,
                       help="report directory (render: raster path)")
        p.add_argument("--tol", type=float, default=1e-9 if top else sup)
        p.add_argument("--budget", type=int, default=200 if top else sup)

    parser = argparse.ArgumentParser(
        prog="qmlab",
        description="batch computations over scenes of topological measures")
    add_common(parser, top=True)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("axioms")
    add_common(p, top=False)
    p.add_argument("--target", required=True)

    p = sub.add_parser("eval")
    add_common(p, top=False)
    p.add_argument("--measure", required=True)
    p.add_argument("--region", action="append", required=True)

    p = sub.add_parser("integrate")
    add_common(p, top=False)
    p.add_argument("--measure", required=True)
    p.add_argument("--function", required=True)

    p = sub.add_parser("kr")
    add_common(p, top=False)
    p.add_argument("--cloud", action="append", default=[])
    p.add_argument("--measure", action="append", default=[])
    p.add_argument("--restarts", type=int, default=12)
    p.add_argument("--iters", type=int, default=40)

    p = sub.add_parser("markov")
    add_common(p, top=False)
    p.add_argument("--system", required=True)
    p.add_argument("--initial", default=None)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--require-convergence", action="store_true")

    p = sub.add_parser("median")
    add_common(p, top=False)
    p.add_argument("--family", required=True)

    p = sub.add_parser("render")
    add_common(p, top=False)
    p.add_argument("--system", required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--burn-in", type=int, default=64)
    p.add_argument("--bounds", type=float, nargs=4, default=None)
    return parser


def run(argv: list[str], stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.scene:
        stdout.write("error,reference,missing --scene\n")
        return REF_ERROR
    try:
        scene = load_scene(args.scene, args.seed)
    except FileNotFoundError:
        stdout.write("error,scene_not_found\n")
        return IO_ERROR
    except SceneError as exc:
        stdout.write(f"error,reference,{exc}\n")
        return REF_ERROR
    out_dir = None if args.verb == "render" else args.out
    report = Report(args.verb, out_dir)
    try:
        if args.verb == "axioms":
            code, figure = cmd_axioms(scene, args, report)
        elif args.verb == "eval":
            code, figure = cmd_eval(scene, args, report)
        elif args.verb == "integrate":
            code, figure = cmd_integrate(scene, args, report)
        elif args.verb == "kr":
            code, figure = cmd_kr(scene, args, report)
        elif args.verb == "markov":
            code, figure = cmd_markov(scene, args, report)
        elif args.verb == "median":
            code, figure = cmd_median(scene, args, report)
        elif args.verb == "render":
            code, figure = cmd_render(scene, args, report), None
        else:  # pragma: no cover
            return REF_ERROR
    except SceneError as exc:
        stdout.write(f"error,reference,{exc}\n")
        return REF_ERROR
    except OSError as exc:
        stdout.write(f"error,io,{exc}\n")
        return IO_ERROR
    except (ValueError, RuntimeError) as exc:
        stdout.write(f"error,invalid,{exc}\n")
        return FAIL
    report.finish(stdout, figure)
    return code


def console_main() -> None:  # pragma: no cover
    sys.exit(run(sys.argv[1:]))
