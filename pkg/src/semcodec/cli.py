"""Command line front end.

Subcommand groups:

  hierarchy   depth-cut, kmeans, coherence, wup
  codec       encode, decode, truncate, inspect
  eval        bdrate, loss, score
  fixtures    generate

Exit codes: 0 success, 2 usage, 3 malformed data, 4 integrity failure.
Errors print a single machine-readable line to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import clustering as cl
from . import context_models as cm
from . import evaluation as ev
from . import fixtures as fx
from . import progressive_codec as pc
from . import taxonomy as tx
from . import tensorio as tio
from .errors import DataError, IntegrityError

ENV_SEED = "SEMCODE_SEED"


def _default_seed() -> int:
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return fx.DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"{ENV_SEED} must be an integer, got '{raw}'") from None


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"error: integrity: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"error: data: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: data: OSError: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcodec",
        description="Progressive latent codec and semantic hierarchy tools.",
    )
    groups = parser.add_subparsers(dest="group", required=True)

    hier = groups.add_parser("hierarchy", help="taxonomy and clustering tools")
    hsub = hier.add_subparsers(dest="command", required=True)

    p = hsub.add_parser("depth-cut", help="cluster classes by taxonomy depth")
    p.add_argument("--tree", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_depth_cut)

    p = hsub.add_parser("kmeans", help="cluster class embeddings")
    p.add_argument("--embeddings", required=True, help="(N, D) float32 tensor file")
    p.add_argument("--labels", required=True, help="text file, one class per line")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_kmeans)

    p = hsub.add_parser("coherence", help="intra/inter cluster similarity")
    p.add_argument("--tree", required=True)
    p.add_argument("--clusters", required=True)
    p.set_defaults(func=_cmd_coherence)

    p = hsub.add_parser("wup", help="Wu-Palmer similarity of two classes")
    p.add_argument("--tree", required=True)
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_wup)

    codec = groups.add_parser("codec", help="progressive bitstream operations")
    csub = codec.add_subparsers(dest="command", required=True)

    p = csub.add_parser("encode", help="encode latents into a stream")
    p.add_argument("--latent", required=True)
    p.add_argument("--hyper", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-delta", action="store_true",
                   help="skip the refinement stage on blocks 2 and 3")
    p.add_argument("--raster", action="store_true",
                   help="order channels by flat index instead of by scale")
    p.set_defaults(func=_cmd_encode)

    p = csub.add_parser("decode", help="decode a stream or stream prefix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--level", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--no-delta", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decode)

    p = csub.add_parser("truncate", help="keep the first N bytes of a stream")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--bytes", dest="nbytes", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_truncate)

    p = csub.add_parser("inspect", help="print header, segments, and rates")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_inspect)

    ev_ = groups.add_parser("eval", help="rate-distortion and semantic scoring")
    esub = ev_.add_subparsers(dest="command", required=True)

    p = esub.add_parser("bdrate", help="delta rate between two RD curves")
    p.add_argument("--a", required=True, help="reference curve CSV")
    p.add_argument("--b", required=True, help="test curve CSV")
    p.add_argument("--method", choices=("cubic", "pchip"), default="cubic")
    p.set_defaults(func=_cmd_bdrate)

    p = esub.add_parser("loss", help="three-level composite objective")
    p.add_argument("--bpp", required=True, help="comma list of three rates")
    p.add_argument("--mse", required=True, help="comma list of three distortions")
    p.add_argument("--ce", required=True, help="comma list of three class losses")
    p.add_argument("--lambdas", default=None, help="comma list, default 1e-4,1e-3,1e-2")
    p.add_argument("--gammas", default=None, help="comma list, default 0.5,1,2")
    p.set_defaults(func=_cmd_loss)

    p = esub.add_parser("score", help="semantic scores of a prediction table")
    p.add_argument("--tree", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--clusters", action="append", default=[],
                   help="clustering CSV, repeat once per level")
    p.set_defaults(func=_cmd_score)

    fixtures = groups.add_parser("fixtures", help="reproducible test inputs")
    fsub = fixtures.add_subparsers(dest="command", required=True)

    p = fsub.add_parser("generate", help="write a self-consistent fixture set")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--height", type=int, default=4, help="latent grid height")
    p.add_argument("--width", type=int, default=4, help="latent grid width")
    p.set_defaults(func=_cmd_generate)

    return parser


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _seed_of(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


# hierarchy


def _cmd_depth_cut(args) -> int:
    t = tx.load_taxonomy(_read_text(args.tree))
    c = tx.depth_cut(t, args.k)
    Path(args.out).write_text(tx.dump_clustering(c), encoding="utf-8")
    print(f"clusters={c.k} classes={len(c.assignment)}")
    return 0


def _cmd_kmeans(args) -> int:
    vectors = tio.read_tensor(args.embeddings)
    labels = [ln.strip() for ln in _read_text(args.labels).splitlines() if ln.strip()]
    if vectors.ndim != 2 or len(labels) != vectors.shape[0]:
        raise DataError(
            f"{len(labels)} labels for embedding table of shape {vectors.shape}"
        )
    e = cl.normalize(cl.EmbeddingSet(tuple(labels), vectors.astype(np.float64)))
    c = cl.kmeans(e, args.k, seed=_seed_of(args))
    Path(args.out).write_text(tx.dump_clustering(c), encoding="utf-8")
    print(f"clusters={c.k} classes={len(c.assignment)} sse={cl.sse(e, c)!r}")
    return 0


def _cmd_coherence(args) -> int:
    t = tx.load_taxonomy(_read_text(args.tree))
    c = tx.parse_clustering(_read_text(args.clusters))
    rep = tx.coherence(t, c)
    print(f"wup_intra={rep.wup_intra!r}")
    print(f"wup_inter={rep.wup_inter!r}")
    print(f"gap={rep.gap!r}")
    return 0


def _cmd_wup(args) -> int:
    t = tx.load_taxonomy(_read_text(args.tree))
    print(repr(tx.wup(t, args.a, args.b)))
    return 0


# codec


def _cmd_encode(args) -> int:
    latent = tio.read_tensor(args.latent)
    hyper = tio.read_tensor(args.hyper)
    bundle = cm.load_bundle_file(args.model)
    data = pc.encode(
        latent.astype(np.int32),
        hyper.astype(np.int32),
        bundle,
        use_delta=not args.no_delta,
        raster_order=args.raster,
    )
    Path(args.out).write_bytes(data)
    print(f"bytes={len(data)}")
    return 0


def _cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    bundle = cm.load_bundle_file(args.model)
    header = pc.parse_header(data[: pc.HEADER_SIZE])
    total = pc.HEADER_SIZE + sum(header.seg_lens)
    if len(data) < total:
        latent, counts = pc.decode_truncated(data, bundle,
                                             use_delta=not args.no_delta)
        print(f"decoded=partial counts={counts[0]},{counts[1]},{counts[2]}")
    else:
        latent = pc.decode(data, bundle, up_to_block=args.level,
                           use_delta=not args.no_delta)
        print(f"decoded=level{args.level}")
    tio.write_tensor(args.out, latent)
    return 0


def _cmd_truncate(args) -> int:
    data = Path(args.input).read_bytes()
    if args.nbytes < 0 or args.nbytes > len(data):
        raise DataError(
            f"cannot keep {args.nbytes} bytes of a {len(data)} byte stream"
        )
    Path(args.out).write_bytes(data[: args.nbytes])
    print(f"bytes={args.nbytes}")
    return 0


def _cmd_inspect(args) -> int:
    data = Path(args.input).read_bytes()
    header = pc.parse_header(data[: pc.HEADER_SIZE])
    cfg = header.cfg
    order = "raster" if header.raster else "sigma"
    print(f"magic=SPC1 version=1 order={order}")
    print(f"blocks={cfg.k1},{cfg.k2},{cfg.k3}")
    print(f"latent={cfg.k3}x{header.h}x{header.w} "
          f"hyper={header.c_z}x{header.h_z}x{header.w_z}")
    print(f"weights_sha256={header.weights_hash.hex()}")
    print("segment,bytes")
    for i, n in enumerate(header.seg_lens):
        print(f"{i},{n}")
    bpps = pc.rate_report(data)
    print("level,bpp")
    for i, b in enumerate(bpps, start=1):
        print(f"{i},{b!r}")
    return 0


# eval


def _floats(raw: str, n: int, what: str) -> tuple[float, ...]:
    parts = [p for p in raw.split(",") if p.strip()]
    if len(parts) != n:
        raise DataError(f"{what} needs {n} comma-separated values, got {len(parts)}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise DataError(f"{what} has a non-numeric entry") from None


def _cmd_bdrate(args) -> int:
    a = ev.parse_rd(_read_text(args.a))
    b = ev.parse_rd(_read_text(args.b))
    print(f"bd_rate_percent={ev.bd_rate(a, b, method=args.method)!r}")
    return 0


def _cmd_loss(args) -> int:
    bpp = _floats(args.bpp, 3, "--bpp")
    mse = _floats(args.mse, 3, "--mse")
    ce = _floats(args.ce, 3, "--ce")
    lambdas = (_floats(args.lambdas, 3, "--lambdas")
               if args.lambdas is not None else ev.DEFAULT_LAMBDAS)
    gammas = (_floats(args.gammas, 3, "--gammas")
              if args.gammas is not None else ev.DEFAULT_GAMMAS)
    value = ev.composite_loss(list(zip(bpp, mse, ce)), lambdas, gammas)
    print(f"loss={value!r}")
    return 0


def _cmd_score(args) -> int:
    t = tx.load_taxonomy(_read_text(args.tree))
    rows = ev.parse_predictions(_read_text(args.pred))
    print(f"wup={ev.wup_score(rows, t)!r}")
    if args.clusters:
        clusterings = {
            i: tx.parse_clustering(_read_text(path))
            for i, path in enumerate(args.clusters, start=1)
        }
        acc = ev.hierarchical_accuracy(rows, clusterings)
        for level in sorted(acc):
            print(f"acc_{level}={acc[level]!r}")
    return 0


# fixtures


def _cmd_generate(args) -> int:
    seed = _seed_of(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    out.joinpath("taxonomy.tsv").write_text(fx.fixture_taxonomy(), encoding="utf-8")
    e = fx.fixture_embeddings(seed=seed)
    tio.write_tensor(out / "embeddings.sptn",
                     np.asarray(e.vectors, dtype=np.float32))
    out.joinpath("labels.txt").write_text(
        "".join(f"{name}\n" for name in e.labels), encoding="utf-8")

    bundle = fx.make_bundle(seed)
    cm.write_bundle_file(out / "bundle.scmb", bundle)
    latent, hyper = fx.sample_latents(bundle, args.height, args.width, seed + 1)
    tio.write_tensor(out / "latent.sptn", latent)
    tio.write_tensor(out / "hyper.sptn", hyper)

    for name in ("taxonomy.tsv", "embeddings.sptn", "labels.txt",
                 "bundle.scmb", "latent.sptn", "hyper.sptn"):
        print(f"wrote {name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
