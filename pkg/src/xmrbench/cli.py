"""Command-line interface.

Subcommands: occlude, toy-gen, toy-train, run, random-baseline,
inspect-embeddings. Data goes to files or stdout; logs go to stderr. Exit
codes: 0 success, 2 usage, 3 I/O, 4 malformed data, 5 embedder failure,
6 internal error. ``XMRBENCH_SEED`` provides the default seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, bench, embedders, toymodel, wire
from .data import (
    ImageDecodeError,
    ManifestError,
    filter_studies,
    load_image,
    load_manifest,
    save_image,
    write_manifest,
)
from .occlusion import OcclusionSpec, apply_occlusion
from .scoring import dump_scores_csv
from .toymodel import ParamsFileError, SyntheticPairSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_EMBEDDER = 5
EXIT_INTERNAL = 6

log = logging.getLogger("xmrbench")


@dataclass(frozen=True)
class RunConfig:
    """Everything `run` needs: bench parameters plus I/O and embedder source."""

    manifest_path: str
    embedder: embedders.EmbedderSpec
    bench: bench.BenchConfig
    out_path: str
    out_format: str
    images_root: str | None = None
    dump_scores_dir: str | None = None
    embedder_timeout: float = 60.0


def _default_seed() -> int:
    env = os.environ.get("XMRBENCH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit("XMRBENCH_SEED must be an integer")
    return 0


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmrbench",
        description="Occlusion-robustness benchmark for image/text retrieval models.",
    )
    parser.add_argument("--version", action="version", version=f"xmrbench {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("occlude", help="write an occluded copy of one image")
    p.add_argument("--in", dest="input", required=True, help="input PNG/JPEG")
    p.add_argument("--p", dest="ratio", type=float, required=True,
                   help="occluded area in percent, 0..100")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fill", type=float, default=0.0, help="fill value in [0,1]")
    p.add_argument("--out", required=True)

    p = sub.add_parser("toy-gen", help="generate a synthetic paired dataset")
    p.add_argument("--studies", type=int, default=200)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--vocab", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("toy-train", help="train the toy dual encoder on synthetic pairs")
    p.add_argument("--objective", choices=["infonce", "triplet", "bce"], default="infonce")
    p.add_argument("--studies", type=int, default=200)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--vocab", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--token-dim", type=int, default=32)
    p.add_argument("--head-hidden", type=int, default=16,
                   help="classifier-head width (used by bce and classifier scoring)")
    p.add_argument("--temperature", type=float, default=0.07)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="parameter file to write")

    p = sub.add_parser("run", help="run the occlusion retrieval benchmark grid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embedder", required=True,
                   help="toy:<params> | random:<dim> | oracle | "
                        "file:<imgs>,<txts> | process:<command>")
    p.add_argument("--scorer", choices=["cosine", "classifier"], default="cosine")
    p.add_argument("--ratios", type=_csv_floats,
                   default=list(bench.DEFAULT_RATIOS), metavar="R1,R2,...")
    p.add_argument("--k", type=_csv_ints, default=list(bench.DEFAULT_KS), metavar="K1,K2,...")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=1, help="occlusion trials per image")
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--text-sections", default="findings,impression",
                   help="comma-separated report sections used as text input")
    p.add_argument("--normalize-embeddings", action="store_true")
    p.add_argument("--occlusion-per-report", action="store_true",
                   help="resample the occlusion block for every (image, report) pair")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker threads per ratio (results are independent of this)")
    p.add_argument("--images-root", default=None,
                   help="base directory for image refs (default: the manifest's directory)")
    p.add_argument("--embedder-timeout", type=float, default=60.0)
    p.add_argument("--dump-scores", default=None, metavar="DIR",
                   help="write per-ratio score matrices as CSV into DIR")
    p.add_argument("--format", choices=["csv", "json"], default=None,
                   help="report format (default: inferred from --out suffix)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("random-baseline", help="expected recall of random retrieval")
    p.add_argument("--n", type=int, required=True, help="number of candidate reports")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mc", action="store_true", help="Monte-Carlo simulation as well")
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("inspect-embeddings", help="print an embedding file's header and ids")
    p.add_argument("path")

    return parser


def parse_args(argv) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = _default_seed()
    return args


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_occlude(args) -> int:
    image = load_image(args.input)
    spec = OcclusionSpec(ratio_percent=args.ratio, seed=args.seed, fill_value=args.fill)
    occluded = apply_occlusion(image, spec)
    suffix = Path(args.input).suffix.lower()
    format = "JPEG" if suffix in (".jpg", ".jpeg") else "PNG"
    save_image(occluded, args.out, format=format)
    log.info("wrote %s (ratio %.2f%%, seed %d)", args.out, args.ratio, args.seed)
    return EXIT_OK


def _toy_spec(args) -> SyntheticPairSpec:
    return SyntheticPairSpec(
        n_studies=args.studies,
        latent_dim=args.latent_dim,
        image_side=args.side,
        vocab_size=args.vocab,
        noise_sigma=args.noise,
        seed=args.seed,
    )


def _cmd_toy_gen(args) -> int:
    spec = _toy_spec(args)
    images, _tokens, manifest = toymodel.gen_synthetic_pairs(spec)
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    for image, study in zip(images, manifest.studies):
        save_image(image, out_dir / study.image_refs[0], format="PNG")
    write_manifest(manifest, out_dir / "manifest.jsonl")
    log.info("wrote %d studies under %s", manifest.report_count, out_dir)
    print(out_dir / "manifest.jsonl")
    return EXIT_OK


def _cmd_toy_train(args) -> int:
    spec = _toy_spec(args)
    images, token_seqs, _manifest = toymodel.gen_synthetic_pairs(spec)
    params = toymodel.init_params(
        spec,
        embed_dim=args.embed_dim,
        token_dim=args.token_dim,
        head_hidden=args.head_hidden,
        temperature=args.temperature,
    )
    trained, trace = toymodel.train(
        params, images, token_seqs,
        objective=args.objective, epochs=args.epochs, lr=args.lr,
        batch_size=args.batch, seed=args.seed, margin=args.margin,
    )
    toymodel.save_params(trained, args.out)
    log.info(
        "trained %s for %d epochs: loss %.4f -> %.4f; wrote %s",
        args.objective, args.epochs, trace[0], trace[-1], args.out,
    )
    return EXIT_OK


def _infer_format(args) -> str:
    if args.format:
        return args.format
    return "json" if Path(args.out).suffix.lower() == ".json" else "csv"


def config_from_args(args) -> RunConfig:
    sections = tuple(s.strip() for s in args.text_sections.split(",") if s.strip())
    bench_config = bench.BenchConfig(
        occlusion_ratios=tuple(args.ratios),
        k_values=tuple(args.k),
        seed=args.seed,
        trials_per_image=args.trials,
        scorer=args.scorer,
        fill_value=args.fill,
        text_sections=sections,
        normalize=args.normalize_embeddings,
        occlusion_per_report=args.occlusion_per_report,
        jobs=args.jobs,
    )
    spec = embedders.parse_embedder_spec(args.embedder, normalize=args.normalize_embeddings)
    return RunConfig(
        manifest_path=args.manifest,
        embedder=spec,
        bench=bench_config,
        out_path=args.out,
        out_format=_infer_format(args),
        images_root=args.images_root,
        dump_scores_dir=args.dump_scores,
        embedder_timeout=args.embedder_timeout,
    )


def run(config: RunConfig) -> int:
    """Drive a full benchmark: load, filter, embed, sweep, emit."""
    manifest = filter_studies(load_manifest(config.manifest_path))
    if manifest.report_count == 0:
        log.error("manifest %s has no studies with findings and impression",
                  config.manifest_path)
        return EXIT_DATA
    root = config.images_root or str(Path(config.manifest_path).parent)

    with embedders.build_embedder(
        config.embedder, manifest=manifest, seed=config.bench.seed,
        timeout=config.embedder_timeout,
    ) as embedder:
        images = None
        if embedder.needs_images:
            images = bench.load_images(manifest, root)
        head = None
        if config.bench.scorer == "classifier":
            if config.embedder.kind != "toy":
                log.error("classifier scoring needs a toy embedder with a trained head")
                return EXIT_USAGE
            head = embedder.params.head
            if head is None:
                log.error("parameter file %s has no classifier head",
                          config.embedder.toy_params_path)
                return EXIT_USAGE
        grid, score_dumps = bench.sweep(
            manifest, embedder, config.bench, images=images, head=head,
            collect_scores=config.dump_scores_dir is not None,
        )

    bench.emit_report(grid, config.out_format, config.out_path, config=config.bench)
    log.info("wrote %s report to %s", config.out_format, config.out_path)
    if config.dump_scores_dir is not None:
        dump_dir = Path(config.dump_scores_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for ratio, matrices in score_dumps.items():
            for trial, matrix in enumerate(matrices):
                dump_scores_csv(matrix, dump_dir / f"scores_p{ratio:.2f}_t{trial}.csv")
        log.info("dumped score matrices to %s", dump_dir)
    return EXIT_OK


def _cmd_random_baseline(args) -> int:
    analytic = bench.random_baseline_analytic(args.n, args.k)
    print(f"analytic,{analytic:.4f}")
    if args.mc:
        mean, stderr = bench.random_baseline_monte_carlo(
            args.n, args.k, args.queries, args.trials, seed=args.seed
        )
        print(f"monte_carlo,{mean:.4f}")
        print(f"stderr,{stderr:.4f}")
    return EXIT_OK


def _cmd_inspect_embeddings(args) -> int:
    table = embedders.read_embeddings(args.path)
    info = {
        "path": args.path,
        "count": len(table),
        "dim": table.dim,
    }
    print(json.dumps(info, sort_keys=True))
    for n, id_ in enumerate(table.ids):
        norm = float(((table.vectors[n].astype("f8")) ** 2).sum() ** 0.5)
        print(f"{id_},{norm:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "occlude":
            return _cmd_occlude(args)
        if args.command == "toy-gen":
            return _cmd_toy_gen(args)
        if args.command == "toy-train":
            return _cmd_toy_train(args)
        if args.command == "run":
            return run(config_from_args(args))
        if args.command == "random-baseline":
            return _cmd_random_baseline(args)
        if args.command == "inspect-embeddings":
            return _cmd_inspect_embeddings(args)
        raise AssertionError(f"unhandled command {args.command!r}")
    except (ManifestError, ImageDecodeError, ParamsFileError,
            embedders.EmbeddingFileError, KeyError) as e:
        log.error("%s", e)
        return EXIT_DATA
    except wire.ProtocolError as e:
        log.error("embedder failure: %s", e)
        return EXIT_EMBEDDER
    except toymodel.TrainingDiverged as e:
        log.error("training diverged: %s", e)
        return EXIT_INTERNAL
    except OSError as e:
        log.error("%s", e)
        return EXIT_IO
    except ValueError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except RuntimeError as e:
        log.error("internal error: %s", e)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
