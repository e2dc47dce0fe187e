"""Command-line interface.

Subcommands: compute-cov, augment, losses, train-ita-t, testbed, interpolate.
Every run writes run.json (the fully resolved configuration) into the output
directory before doing work, so any artifact can be reproduced from it.

Exit codes: 0 success, 1 proposition/assertion failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, augment as aug_mod, covariance as cov_mod, store, testbed, tinynet
from .errors import SadaError
from .losses import LrTarget, ShiftQuadruple, loss_db, loss_r, semantic_loss_total

log = logging.getLogger("sada")

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed for this run")
    parser.add_argument("--threads", type=int, default=1,
                        help="recorded for reproducibility; execution is single-threaded")
    parser.add_argument("--output-dir", type=Path, required=True, help="directory for outputs")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _write_run_config(args: argparse.Namespace) -> Path:
    out: Path = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    resolved = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        resolved[key] = str(value) if isinstance(value, Path) else value
    resolved["version"] = __version__
    path = out / "run.json"
    path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    log.debug("run config written to %s", path)
    return out


def _load_cond(cov_dir: Path) -> tuple[cov_mod.CovarianceSet, cov_mod.ConditionalDiagonals]:
    return cov_mod.load_covariance_artifact(cov_dir)


# --- subcommand implementations ---------------------------------------------------


def cmd_compute_cov(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    corpus = store.load_corpus(args.corpus)
    if args.subsample is not None:
        corpus = store.subsample(corpus, args.subsample, args.seed)
    cov = cov_mod.estimate_covariances(corpus, ridge_lambda=args.ridge)
    cond = cov_mod.conditional_both(cov, store_full=False)
    cov_mod.save_covariance_artifact(cov, cond, out)
    for name, block in (("C_ss", cov.c_ss), ("C_rr", cov.c_rr)):
        lam = cov_mod.resolve_ridge(cov, block)
        cond_no = np.linalg.cond(block + lam * np.eye(block.shape[0]))
        print(f"{name}: dim={block.shape[0]} ridge={lam:.6e} condition={cond_no:.6e}")
    print(f"covariance artifact written to {out} ({corpus.count} pairs)")
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    corpus = store.load_corpus(args.corpus)
    _, cond = _load_cond(args.cov)
    spec = aug_mod.AugmentationSpec(beta=args.beta, mode=args.mode, seed=args.seed)
    batch = aug_mod.augment(corpus.text.as_f64(), cond, spec)
    augmented = store.PairedCorpus(
        text=store.EmbeddingMatrix(batch.augmented.astype(np.float32), store.ROLE_TEXT),
        image=corpus.image,
        manifest=replace(
            corpus.manifest,
            source_note=(
                f"{corpus.manifest.source_note} "
                f"[augmented beta={args.beta} mode={args.mode} seed={args.seed}]"
            ).strip(),
        ),
    )
    manifest = store.save_corpus(augmented, out)
    print(f"augmented corpus written to {out} ({manifest.pair_count} pairs)")
    return EXIT_OK


def cmd_losses(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    desc_path = Path(args.batch)
    desc = json.loads(desc_path.read_text())
    dim, count = int(desc["dim"]), int(desc["count"])
    base = desc_path.parent
    mats = {
        name: store.read_f64_matrix(base / desc["files"][name], (count, dim))
        for name in ("e_s", "e_s_prime", "e_f", "e_f_prime")
    }
    _, cond = _load_cond(args.cov)
    d_rr = cond.require_rr_given_s()
    if d_rr.shape[0] != dim:
        raise SadaError(f"covariance artifact dim {d_rr.shape[0]} != batch dim {dim}")
    rows = ["l_db,l_r,l_s"]
    for i in range(count):
        q = ShiftQuadruple(
            e_s=mats["e_s"][i],
            e_s_prime=mats["e_s_prime"][i],
            e_f=mats["e_f"][i],
            e_f_prime=mats["e_f_prime"][i],
        )
        # The ±1 pattern is recovered from the text-shift signs (exact for
        # rademacher-mode augmentation, where the shift is eps* ⊙ beta*d > 0).
        eps_star = np.where(q.text_shift() >= 0, 1.0, -1.0)
        target = LrTarget(
            epsilon_star=eps_star, beta=args.beta, d_rr_given_s=d_rr, varphi=args.varphi
        )
        l_db = loss_db(q, squared_norms=args.squared_norms)
        l_r = loss_r(q, target)
        l_s = semantic_loss_total(
            mats["e_s"][i], mats["e_s_prime"][i], mats["e_f"][i], mats["e_f_prime"][i],
            omit_first=args.omit_first,
        )
        rows.append(f"{l_db!r},{l_r!r},{l_s!r}")
    (out / "losses.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {count} loss rows to {out / 'losses.csv'}")
    return EXIT_OK


def cmd_train_ita_t(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    corpus = store.load_corpus(args.corpus)
    _, cond = _load_cond(args.cov)
    d_ss = cond.require_ss_given_r()
    if d_ss.shape[0] != corpus.text.dim:
        raise SadaError("covariance artifact does not match the corpus text dim")
    collapse_scale = float(np.mean(args.beta * d_ss))
    if collapse_scale <= 0:
        raise SadaError("reference scale beta*mean(d(C_ss|r)) must be positive")
    cap = args.distance_cap
    if cap is None:
        cap = tinynet.default_distance_cap(collapse_scale)
    cfg = tinynet.ItaTTrainConfig(
        r=args.r,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        warmup_epochs=args.warmup,
        distance_cap=cap,
        seed=args.seed,
    )
    net = tinynet.TinyNet(dim=corpus.text.dim, steps=args.steps)
    net.randomize_features(cfg.seed)
    trace = tinynet.train(
        net, corpus, tinynet.IdentityGenerator(), cfg,
        collapse_scale=collapse_scale, batch_size=args.batch_size,
    )
    tinynet.save_net(net, out)
    trace.to_csv(out / "trace.csv")
    print(
        f"trained {args.epochs} epochs; final mean |e'-e| = {trace.mean_abs_shift[-1]:.6e}; "
        f"collapse_flag={trace.collapse_flag}"
    )
    return EXIT_OK


def cmd_testbed(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    settings = testbed.TestbedSettings(
        master_seed=args.seed,
        n_seeds=args.n_seeds,
        beta=args.beta,
        prop1_mode=args.prop1_mode,
        prop3_iters=args.prop3_iters,
        prop4_iters=args.prop4_iters,
    )
    report = testbed.run_all(settings)
    testbed.write_report(report, out / "report.json")
    for name, ok in report.proposition_passes().items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK if report.all_passed() else EXIT_ASSERTION


def cmd_interpolate(args: argparse.Namespace) -> int:
    out = _write_run_config(args)
    corpus = store.load_corpus(args.corpus)
    _, cond = _load_cond(args.cov)
    if not 0 <= args.row < corpus.count:
        raise SadaError(f"--row {args.row} out of range for corpus of {corpus.count} pairs")
    spec = aug_mod.AugmentationSpec(beta=args.beta, mode=args.mode, seed=args.seed)
    batch = aug_mod.augment(corpus.text.as_f64()[args.row : args.row + 1], cond, spec)
    points = aug_mod.interpolate(batch.original[0], batch.augmented[0], args.steps)
    lines = [",".join(repr(float(v)) for v in point) for point in points]
    (out / "interpolation.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(points)} interpolation points to {out / 'interpolation.csv'}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sada",
        description="Semantic-aware augmentation toolkit for paired embedding corpora.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute-cov", help="estimate covariance blocks and conditionals")
    p.add_argument("--corpus", type=Path, required=True, help="corpus manifest path")
    p.add_argument("--subsample", type=int, default=None, help="subsample K pairs first")
    p.add_argument("--ridge", type=float, default=None, help="ridge lambda (default: auto)")
    _add_common(p)
    p.set_defaults(func=cmd_compute_cov)

    p = sub.add_parser("augment", help="write a perturbed copy of a corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--cov", type=Path, required=True, help="covariance artifact directory")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--mode", choices=[aug_mod.MODE_UNIFORM, aug_mod.MODE_RADEMACHER],
                   default=aug_mod.MODE_UNIFORM)
    _add_common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("losses", help="evaluate L_db/L_r/L_S over a batch file")
    p.add_argument("--batch", type=Path, required=True, help="batch descriptor JSON")
    p.add_argument("--cov", type=Path, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--varphi", type=float, default=0.01)
    p.add_argument("--omit-first", action="store_true",
                   help="drop the S(e_s, G(e_s)) term from the total")
    p.add_argument("--squared-norms", action="store_true",
                   help="use the squared-norm direction-bounding denominator")
    _add_common(p)
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("train-ita-t", help="train the learnable augmenter")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--cov", type=Path, required=True)
    p.add_argument("--beta", type=float, default=0.05,
                   help="scale for the collapse reference mean(beta*d(C_ss|r))")
    p.add_argument("--r", type=float, default=0.2, help="augmentation-strength weight")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--warmup", type=int, default=0)
    p.add_argument("--distance-cap", type=float, default=None,
                   help="cap on the distance term (default 100*scale^2)")
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--batch-size", type=int, default=None,
                   help="mini-batch size (default: full batch)")
    _add_common(p)
    p.set_defaults(func=cmd_train_ita_t)

    p = sub.add_parser("testbed", help="run every proposition experiment")
    p.add_argument("--n-seeds", type=int, default=100)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--prop1-mode", choices=[testbed.PROP1_AVERAGED, testbed.PROP1_SAMPLED],
                   default=testbed.PROP1_AVERAGED)
    p.add_argument("--prop3-iters", type=int, default=400)
    p.add_argument("--prop4-iters", type=int, default=2000)
    _add_common(p)
    p.set_defaults(func=cmd_testbed)

    p = sub.add_parser("interpolate", help="interpolate between a row and its augmentation")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--cov", type=Path, required=True)
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--mode", choices=[aug_mod.MODE_UNIFORM, aug_mod.MODE_RADEMACHER],
                   default=aug_mod.MODE_UNIFORM)
    p.add_argument("--steps", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_interpolate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    try:
        return args.func(args)
    except SadaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
