"""Command-line entry point: `dnnexport export`."""

from __future__ import annotations

import argparse
import runpy
import sys
from pathlib import Path

import torch

from .export import ExportError, ExportSession, export_model


def _load_model(spec: str) -> torch.nn.Module:
    """Load a model from `file.pt` (torch.save'd module) or `file.py[:name]`.

    For .py sources the named top-level attribute (default "model") is used;
    a callable attribute is invoked with no arguments to build the module.
    """
    path, _, attr = spec.partition(":")
    p = Path(path)
    if p.suffix in (".pt", ".pth"):
        obj = torch.load(p, weights_only=False)
    elif p.suffix == ".py":
        ns = runpy.run_path(str(p))
        name = attr or "model"
        if name not in ns:
            raise ExportError(f"'{p}' defines no attribute '{name}'")
        obj = ns[name]
        if callable(obj) and not isinstance(obj, torch.nn.Module):
            obj = obj()
    else:
        raise ExportError(f"unsupported model file type '{p.suffix}'")
    if not isinstance(obj, torch.nn.Module):
        raise ExportError(f"'{spec}' is not a torch.nn.Module")
    return obj


def _triple(text: str, flag: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ExportError(f"{flag} expects three comma-separated integers")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dnnexport")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="export a PyTorch model")
    exp.add_argument("--input", required=True,
                     help="model file: .pt/.pth, or .py[:attr]")
    exp.add_argument("--shape", required=True, help="example input C,H,W")
    exp.add_argument("--precision", default="16,16,32",
                     help="declared W,A,ACC bit widths (default 16,16,32)")
    exp.add_argument("--name", default=None, help="model name in the document")
    exp.add_argument("--out", required=True, help="output document path")
    args = parser.parse_args(argv)

    try:
        session = ExportSession(
            model=_load_model(args.input),
            input_shape=_triple(args.shape, "--shape"),
            precision=_triple(args.precision, "--precision"),
            name=args.name or Path(args.input).stem.split(":")[0],
        )
        document = export_model(session)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        Path(args.out).write_text(document)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
