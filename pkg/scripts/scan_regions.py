import argparse
import logging
from concurrent.futures import ProcessPoolExecutor

from slagrigid import cfg
from slagrigid.cli import scan_csv
from slagrigid.regions import CONDITIONS, region_scan
from slagrigid.utils import setup, write_dict, write_metadata


def main():
    parser = argparse.ArgumentParser(
        description="Random region scans for several dimensions, one process per dimension"
    )
    parser.add_argument(
        "-d",
        "--dims",
        type=int,
        nargs="+",
        required=True,
        help="Dimensions n to scan",
    )
    parser.add_argument("-K", "--K", type=float, default=3.0, help="Half-width of the sampling box")
    parser.add_argument("-n", "--count", type=int, default=500, help="Samples per dimension")
    parser.add_argument("-c", "--condition", choices=CONDITIONS, default="none")
    parser.add_argument(
        "-p",
        "--processes",
        type=int,
        help="Number of processes to scan in parallel (defaults to all cores)",
        default=None,
    )
    parser.add_argument(
        "-o",
        "--output_folder",
        required=True,
        help="Output folder for the per-dimension summaries",
    )
    parser.add_argument(
        "-l",
        "--log_level",
        default="INFO",
        help="DEBUG, INFO, WARNING, ERROR",
    )
    parser.add_argument("-s", "--seed", default=42, type=int)
    args = parser.parse_args()

    output_folder = setup(args, "scan.log")

    write_metadata(cfg, output_folder)

    with ProcessPoolExecutor(max_workers=args.processes) as executor:
        futures = {
            n: executor.submit(region_scan, n, args.K, args.count, args.seed, args.condition)
            for n in args.dims
        }

        for n, future in futures.items():
            try:
                summary = future.result()
            except RuntimeError as e:
                logging.error("scan for n=%d failed: %s", n, e)
                continue

            write_dict(summary.to_dict(), output_folder / f"scan_n{n}.json")
            (output_folder / f"scan_n{n}.csv").write_text(scan_csv(summary))
            logging.info(
                "n=%d: %d samples, %d in M, %d counterexamples",
                n,
                summary.count,
                summary.memberships["in_m"],
                len(summary.counterexamples),
            )
            for c in summary.counterexamples:
                logging.warning("n=%d counterexample (%s): %s", n, c["kind"], c["spectrum"])


if __name__ == "__main__":
    main()
