"""Command-line entry: drive or validate a running environment service.

    coexplore-client --address 127.0.0.1:7799 --mode random --steps 300
    coexplore-client --address 127.0.0.1:7799 --mode validate
"""

from __future__ import annotations

import argparse
import sys

from .client import ProtocolError, VersionMismatch, connect
from .runner import run_episode, validate_schema


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="coexplore-client", description=__doc__)
    ap.add_argument("--address", required=True, help="service address, host:port")
    ap.add_argument("--mode", choices=("random", "greedy-proxy", "validate"), default="random")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=300)
    args = ap.parse_args(argv)

    try:
        session = connect(args.address)
    except (ConnectionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.mode == "validate":
            report = validate_schema(session, seed=args.seed)
            print(report.render())
            return 0 if report.passed else 1
        summary = run_episode(session, args.seed, args.steps, mode=args.mode)
        return 0 if summary.mask_violations == 0 else 1
    except VersionMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 2
    finally:
        session.close()


if __name__ == "__main__":
    sys.exit(main())
