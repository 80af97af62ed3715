"""Command-line interface.

Subcommands: segment, tv-inpaint, inpaint, restore, osmosis, stereo,
replay, serve.  Exit codes: 0 success, 1 algorithmic failure, 2 usage or
IO error.  The FOLIO_THREADS environment variable caps the numba thread
count for the patch kernels.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import FolioError, InvalidInputError
from .exemplar import PatchParams, inpaint_exemplar
from .pipeline import (
    PipelineConfig,
    load_config,
    replay_manifest,
    run_osmosis,
    run_restore,
    run_stereo,
)
from .raster import load_annotation, load_image, save_image
from .tv import TvParams, tv_inpaint

THREADS_ENV = "FOLIO_THREADS"


def _parse_seed_px(values: list[str]) -> list[tuple[int, int]]:
    seeds = []
    for value in values:
        try:
            x, y = value.split(",")
            seeds.append((int(x), int(y)))
        except ValueError as exc:
            raise InvalidInputError(f"--seed-px expects x,y integers, got {value!r}") from exc
    return seeds


def _require_file(path: str | None, flag: str) -> Path:
    if path is None:
        raise FileNotFoundError(f"missing required flag {flag}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{flag}: no such file {p}")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="folio", description="Restoration toolkit for digitized illuminated manuscripts"
    )
    # --config parses before or after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value given before it.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default=argparse.SUPPRESS, help="INI config file with stage parameters"
    )
    parser.add_argument("--config", default=None, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    def add_parser(name: str, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    seg = add_parser("segment", help="detect the damaged region from seed clicks")
    seg.add_argument("--image", required=True)
    seg.add_argument("--seed-px", action="append", default=[], metavar="X,Y")
    seg.add_argument("--out-dir", required=True)

    tvp = add_parser("tv-inpaint", help="total-variation inpainting")
    tvp.add_argument("--image", required=True)
    tvp.add_argument("--mask", required=True, help="annotation PNG (gray = inpaint)")
    tvp.add_argument("--lambda", dest="lam", type=float, default=1000.0)
    tvp.add_argument("--max-iter", type=int, default=1000)
    tvp.add_argument("--out", required=True)

    inp = add_parser("inpaint", help="exemplar-based inpainting")
    inp.add_argument("--image", required=True)
    inp.add_argument("--mask", required=True)
    inp.add_argument("--patch-side", type=int, default=7)
    inp.add_argument("--iters", type=int, default=12)
    inp.add_argument("--scales", type=int, default=2)
    inp.add_argument("--seed", type=int, default=0)
    inp.add_argument("--init", choices=("from-tv", "from-file"), default="from-tv")
    inp.add_argument("--init-file")
    inp.add_argument("--out", required=True)

    res = add_parser("restore", help="full detect + inpaint pipeline")
    res.add_argument("--image", required=True)
    res.add_argument("--seed-px", action="append", default=[], metavar="X,Y")
    res.add_argument("--mask", help="precomputed damage annotation instead of seeds")
    res.add_argument("--out-dir", required=True)

    osm = add_parser("osmosis", help="reveal over-painted content via drift splicing")
    osm.add_argument("--rgb", required=True)
    osm.add_argument("--ir", help="infrared image; omit for pure shadow removal")
    osm.add_argument("--mask", required=True)
    osm.add_argument("--out", required=True)

    ste = add_parser("stereo", help="synthesize a stereo pair from a layered scene")
    ste.add_argument("--image", required=True)
    ste.add_argument("--scene", required=True)
    ste.add_argument("--baseline", type=float)
    ste.add_argument("--fov", type=float, default=40.0)
    ste.add_argument("--output-mode", choices=("side_by_side", "crossed", "anaglyph"),
                     default="side_by_side")
    ste.add_argument("--seed", type=int, default=0)
    ste.add_argument("--out", required=True)

    rep = add_parser("replay", help="re-run a manifest and verify byte-identical outputs")
    rep.add_argument("--manifest", required=True)
    rep.add_argument("--out-dir", required=True)

    srv = add_parser("serve", help="run the annotation HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--store", default="./folio-sessions")

    return parser


def _apply_thread_env() -> None:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return
    try:
        import numba

        numba.set_num_threads(max(1, int(value)))
    except (ImportError, ValueError):
        pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_thread_env()

    config_path = getattr(args, "config", None)
    try:
        config = load_config(config_path) if config_path else PipelineConfig()
        return _dispatch(args, config)
    except FileNotFoundError as exc:
        print(f"folio: {exc}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"folio: {exc}", file=sys.stderr)
        return 2
    except FolioError as exc:
        print(f"folio: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.command == "segment":
        seeds = _parse_seed_px(args.seed_px)
        if not seeds:
            raise InvalidInputError("segment needs at least one --seed-px")
        _require_file(args.image, "--image")
        run_restore(args.image, args.out_dir, seeds=seeds, config=config, stop_after="damage")
        return 0

    if args.command == "tv-inpaint":
        image = load_image(_require_file(args.image, "--image"))
        mask = load_annotation(
            _require_file(args.mask, "--mask"), expected_size=(image.height, image.width)
        )
        params = TvParams(lam=args.lam, max_iter=args.max_iter)
        result = tv_inpaint(image, mask, params)
        save_image(result.image, args.out)
        print(f"tv-inpaint: {result.iterations} iterations, energy {result.energy:.6g}")
        return 0

    if args.command == "inpaint":
        image = load_image(_require_file(args.image, "--image"))
        mask = load_annotation(
            _require_file(args.mask, "--mask"), expected_size=(image.height, image.width)
        )
        params = PatchParams(
            patch_side=args.patch_side,
            propagation_iters=args.iters,
            scales=args.scales,
            rng_seed=args.seed,
        )
        init_image = None
        if args.init == "from-file":
            init_image = load_image(_require_file(args.init_file, "--init-file"))
        result = inpaint_exemplar(image, mask, params, init_image=init_image)
        save_image(result.image, args.out)
        return 0

    if args.command == "restore":
        _require_file(args.image, "--image")
        seeds = _parse_seed_px(args.seed_px)
        mask_path = None
        if args.mask:
            mask_path = _require_file(args.mask, "--mask")
        run_restore(
            args.image,
            args.out_dir,
            seeds=seeds or None,
            mask_path=mask_path,
            config=config,
        )
        return 0

    if args.command == "osmosis":
        rgb = _require_file(args.rgb, "--rgb")
        mask = _require_file(args.mask, "--mask")
        ir = _require_file(args.ir, "--ir") if args.ir else None
        run_osmosis(rgb, mask, args.out, ir_path=ir)
        return 0

    if args.command == "stereo":
        image = _require_file(args.image, "--image")
        scene = _require_file(args.scene, "--scene")
        run_stereo(
            image,
            scene,
            args.out,
            baseline=args.baseline,
            fov_degrees=args.fov,
            output_mode=args.output_mode,
            rng_seed=args.seed,
        )
        return 0

    if args.command == "replay":
        manifest = _require_file(args.manifest, "--manifest")
        ok = replay_manifest(manifest, args.out_dir)
        if not ok:
            print("folio: replay outputs differ from the manifest", file=sys.stderr)
            return 1
        print("replay: outputs byte-identical")
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(args.store), host=args.host, port=args.port)
        return 0

    raise InvalidInputError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
