"""``viz``: run scripts headlessly, serve a live session, import raw volumes."""

from __future__ import annotations

import argparse
import os

from .gateway import cli_import, cli_run


def _size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    w, h = int(parts[0]), int(parts[1])
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be >= 1x1, got {text!r}")
    return w, h


def _dims(text: str) -> tuple[int, ...]:
    parts = text.lower().split("x")
    if not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected e.g. 64x64x64, got {text!r}")
    return tuple(int(p) for p in parts)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="viz", description="multiview lattice field visualization"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a script and write its snapshots")
    run.add_argument("script", help="script file (.vl)")
    run.add_argument(
        "--headless",
        action="store_true",
        help="accepted for compatibility; runs are always headless",
    )
    run.add_argument("--out", default=".", metavar="DIR", help="snapshot directory")
    run.add_argument(
        "--size",
        type=_size,
        default=None,
        metavar="WxH",
        help="default snapshot size for commands without one",
    )
    run.add_argument(
        "--strict", action="store_true", help="stop at the first script error"
    )
    run.add_argument("--data", default=None, metavar="DIR", help="dataset root")

    serve = sub.add_parser("serve", help="serve one live session over WebSocket")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data", default=None, metavar="DIR", help="dataset root")
    serve.add_argument(
        "--ui", default=None, metavar="DIR", help="static browser client to serve at /"
    )

    imp = sub.add_parser("import", help="convert a raw voxel block to .ndvf")
    imp.add_argument("raw", help="headerless binary volume file")
    imp.add_argument("--dims", type=_dims, required=True, metavar="AxBxC")
    imp.add_argument("--dtype", default="f32", choices=["f32", "f64", "u8", "u16"])
    imp.add_argument("--spacing", type=_floats, default=None, metavar="A,B,C")
    imp.add_argument("--origin", type=_floats, default=None, metavar="A,B,C")
    imp.add_argument("--order", default="f", choices=["f", "c"])
    imp.add_argument("--out", default=None, metavar="FILE")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cli_run(
            args.script,
            out_dir=args.out,
            size=args.size,
            strict=args.strict,
            data_dir=args.data,
        )
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        ui = args.ui
        if ui is None and os.path.isdir(os.path.join("frontend", "dist")):
            ui = os.path.join("frontend", "dist")
        uvicorn.run(create_app(args.data, ui), host=args.host, port=args.port)
        return 0
    return cli_import(
        args.raw,
        dims=args.dims,
        dtype=args.dtype,
        spacing=args.spacing,
        origin=args.origin,
        order=args.order,
        out=args.out,
    )


if __name__ == "__main__":
    raise SystemExit(main())
