# Folder: platter/pl_runtime/cli
# File:   main.py

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from pl_core.errors import EXIT_OK, PlatterError
from pl_drivers.storage.run_store import close_connections
from pl_runtime.adapters.registry import dispatch
from pl_runtime.cli.commands import EVAL_MODES

__all__ = ["build_parser", "main"]

log = logging.getLogger("platter")


def _positive(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="platter", description="Shape-preserving food image GAN toolkit.")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="materialize a synthetic shape/texture dataset pair")
    s.add_argument("--config", help="SynthSpec JSON file")
    s.add_argument("--seed", type=int)
    s.add_argument("--num-images", type=int)
    s.add_argument("--image-size", type=int)
    s.add_argument("--output-dir")

    t = sub.add_parser("train", help="two-stage adversarial training")
    t.add_argument("--config", help="run JSON: shape_dir, texture_dir, train{...}")
    t.add_argument("--shape-dir")
    t.add_argument("--texture-dir")
    t.add_argument("--resume-from")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=_positive)
    t.add_argument("--batch-size", type=_positive)
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--conditional", action="store_true", default=None)
    t.add_argument("--image-size", type=_positive, help="defaults to the size recorded in the dataset manifests")
    t.add_argument("--resize", action="store_true", default=None, help="resample to --image-size when it differs from the manifests")
    t.add_argument("--extract-items", action="store_true", default=None, help="train on one food-only crop per mask label")
    t.add_argument("--output-dir")

    g = sub.add_parser("generate", help="styles per shape input, plus grids")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--inputs", required=True, help="directory of shape images")
    g.add_argument("--styles-per-input", type=_positive, default=8)
    g.add_argument("--category", type=int)
    g.add_argument("--sweep-categories", dest="sweep", action="store_true")
    g.add_argument("--limit", type=_positive)
    g.add_argument("--seed", type=int)
    g.add_argument("--output-dir")

    e = sub.add_parser("eval", help="FID, per-category FID or IoU shape preservation")
    e.add_argument("--mode", required=True, choices=list(EVAL_MODES))
    e.add_argument("--generated", required=True, help="checkpoint (.pt), image directory or feature file (.feat)")
    e.add_argument("--reference", required=True, help="image directory or feature file (.feat)")
    e.add_argument("--extractor", default="desk", help="'desk' or a saved extractor .pt")
    e.add_argument("--shape-dir", help="shape inputs when --generated is a checkpoint")
    e.add_argument("--num-samples", type=_positive)
    e.add_argument("--num-inputs", type=_positive, default=5)
    e.add_argument("--styles-per-input", type=_positive, default=8)
    e.add_argument("--category", type=int)
    e.add_argument("--image-size", type=int)
    e.add_argument("--classifier-epochs", type=_positive, default=8)
    e.add_argument("--seed", type=int)
    e.add_argument("--output-dir")

    r = sub.add_parser("replay", help="re-run a command from its manifest")
    r.add_argument("manifest")
    r.add_argument("--output-dir")

    ls = sub.add_parser("runs", help="list recorded runs")
    ls.add_argument("--limit", type=_positive, default=20)
    ls.add_argument("--filter", dest="filter_command")
    return p


def _kwargs(ns: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "log_level"}
    return {k: v for k, v in vars(ns).items() if k not in skip}


def main(argv: Optional[List[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, ns.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    kwargs = _kwargs(ns)
    try:
        if ns.command == "runs":
            for row in dispatch("runs", limit=kwargs["limit"], command=kwargs["filter_command"]):
                print(json.dumps(row, ensure_ascii=False))
            return EXIT_OK
        if ns.command == "replay":
            res = dispatch("replay", manifest_path=kwargs["manifest"], output_dir=kwargs["output_dir"])
        else:
            res = dispatch(ns.command, **kwargs)
    except PlatterError as e:
        print(f"platter {ns.command}: {e}", file=sys.stderr)
        return e.exit_code
    finally:
        close_connections()
    print(json.dumps({"run_id": res["run_id"], "output_dir": res["output_dir"], "manifest": res["manifest_path"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
