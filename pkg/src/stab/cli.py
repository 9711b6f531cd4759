"""Command-line front end: ``stab bounds-grid|bounds-layers|verify|restore``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bounds, experiments, fileio, network
from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64
EXIT_IO = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="stab", description="Stability certificates of unrolled deconvolution networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds-grid", help="certificates over a (lambda, eta) sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds-layers", help="certificates of the truncated networks versus depth")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="check certificates against dense oracles and random probes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--certificate-scale", type=float, default=1.0, help=argparse.SUPPRESS)

    p = sub.add_parser("restore", help="blur an image, restore it, and write a certificate sidecar")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    return parser


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fileio.write_csv(fh, header, rows)


def _bounds_grid(args, cfg):
    header, rows, ok = experiments.bounds_grid_rows(cfg)
    _write(args.out, header, rows)
    return EXIT_OK if ok else EXIT_NUMERIC


def _bounds_layers(args, cfg):
    header, rows = experiments.bounds_layer_rows(cfg)
    _write(args.out, header, rows)
    return EXIT_OK


def _verify(args, cfg):
    header, rows, ok = experiments.verify_rows(cfg, trials=args.trials, seed=args.seed,
                                               certificate_scale=args.certificate_scale)
    _write(args.out, header, rows)
    return EXIT_OK if ok else EXIT_VERIFY


def _restore(args, cfg):
    image = fileio.read_pgm(args.input)
    if image.shape != cfg.grid().shape:
        cfg = cfg.with_grid(*image.shape)
    eig = cfg.eigensystem()
    schedule = cfg.schedule()
    prox = cfg.prox()
    phi = cfg.phi(eig)
    y, b0 = network.make_observation(image, eig, cfg.data["verify"]["noise_sigma"], cfg.seed)
    x0 = network.apply_prefilter(b0, phi, eig)
    path = network.run_network(x0, b0, schedule, eig, prox, trajectory=True)
    fileio.write_pgm(args.out, path[-1])

    rows = [{"key": "observation_error", "value": float(np.linalg.norm(y - image))},
            {"key": "restoration_error", "value": float(np.linalg.norm(path[-1] - image))}]
    for n, x in enumerate(path[1:], start=1):
        val = network.objective_value(x, y, eig, schedule.tau[n - 1], schedule.mu[n - 1], prox, schedule.chi_bar)
        rows.append({"key": f"objective_{n}", "value": val})
    ledger = bounds.certify(schedule, eig, phi=phi, alphas=cfg.alphas)
    rows.extend({"key": k, "value": v} for k, v in ledger.as_dict().items())
    _write(args.out + ".csv", ["key", "value"], rows)
    return EXIT_OK


COMMANDS = {
    "bounds-grid": _bounds_grid,
    "bounds-layers": _bounds_layers,
    "verify": _verify,
    "restore": _restore,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"stab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"stab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, bounds.InvalidUsageError, bounds.UnsupportedConfigurationError) as exc:
        print(f"stab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"stab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
