import argparse
import logging
import sys
from dotenv import load_dotenv

from umeit_monotonicity import pipeline
from umeit_monotonicity.config import load_run_config
from umeit_monotonicity.errors import UmeitError
from umeit_monotonicity.validator.numbers import validate_number_or_keyword

load_dotenv()  # loads .env into process env


def _keyword_or_number(keyword: str, *, positive: bool = False):
    def parse(raw: str) -> float | str:
        ok, code, value = validate_number_or_keyword(raw, (keyword,), positive=positive, nonnegative=not positive)
        if not ok:
            raise argparse.ArgumentTypeError(f"expected a number or '{keyword}' ({code})")
        return value
    return parse


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1 (got {value})")
    return value


def _build_parser() -> argparse.ArgumentParser:
    # shared flags are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Path to the JSON run config (see config.example.json)")
    common.add_argument("--mesh-level", type=int, default=None, help="Override geometry.mesh_level")
    common.add_argument("--delta", type=_keyword_or_number("auto"), default=None,
                        help="Regularization delta >= 0, or 'auto' for the two-level estimate")
    common.add_argument("--beta", type=_keyword_or_number("max"), default=None,
                        help="Modulation strength > 0, or 'max' for the theorem bound")
    common.add_argument("--out", default=None, help="Output directory (overrides output.dir)")
    common.add_argument("--symmetrize", action="store_true",
                        help="Average (R + R^T)/2 before any downstream use")
    common.add_argument("--threads", type=_positive_int, default=None, help="Worker threads for drive solves")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level",
    )

    p = argparse.ArgumentParser(
        prog="umeit",
        description="Shunt-electrode EIT simulation and the ultrasound-modulated monotonicity test.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="Build the disk mesh and write mesh.csv")
    sub.add_parser("simulate", parents=[common], help="Write DC, AC and modulated DC measurement matrices")
    test = sub.add_parser("test", parents=[common], help="Run the regularized definiteness test per region")
    test.add_argument("--region", default=None, help="Only test the detection region with this name")
    test.add_argument("--matrices", default=None, metavar="DIR",
                      help="Reuse R_ac.csv and R_mod_<region>.csv written by `simulate` into DIR")
    sub.add_parser("scan", parents=[common], help="Test every ball of a grid and write scan.csv / scan.pgm")
    sub.add_parser("verify", parents=[common], help="Run the cross-module property suite")
    return p


def main(argv: list[str] | None = None) -> None:
    parser = _build_parser()
    args = parser.parse_args(argv)

    # --- logging setup ---
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger = logging.getLogger("cli")

    try:
        # Precedence: CLI > file > env > defaults
        cfg = load_run_config(
            args.config,
            mesh_level=args.mesh_level,
            delta=args.delta,
            beta=args.beta,
            out_dir=args.out,
            threads=args.threads,
            symmetrize=args.symmetrize,
        )
        if args.command == "mesh":
            summary = pipeline.run_mesh(cfg)
        elif args.command == "simulate":
            summary = pipeline.run_simulate(cfg)
        elif args.command == "test":
            summary = pipeline.run_test(cfg, region=args.region, matrices_dir=args.matrices)
        elif args.command == "scan":
            summary = pipeline.run_scan_command(cfg)
        else:
            summary = pipeline.run_verify(cfg)
        logger.info("Summary: %s", summary)
    except UmeitError as e:
        logger.error("%s failed: %s", args.command, e.one_line())
        sys.exit(2)
    except Exception as e:
        logger.exception("Fatal error: %s", e)
        sys.exit(2)

    # Exit non-zero when the run completed with failed balls or properties
    failed = summary.get("failed", 0)
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
