import json
import logging
import math
import pathlib
import subprocess
import sys
from typing import Optional


def setup(args, log_file, print_stdout=True) -> pathlib.Path:
    """
    Create output folder, setup logging, log the git hash, log the script args

    Args:
        args (Namespace): An object containing the command-line arguments passed to the script.
                                Must contain `output_folder` and `log_level`.

    Returns:
        A `Path` object representing the output folder.
    """
    output_folder = pathlib.Path(args.output_folder)
    output_folder_exists = output_folder.is_dir()

    if not output_folder_exists:
        output_folder.mkdir(parents=True)

    setup_logging(args.log_level, print_stdout=print_stdout, filename=output_folder / log_file)

    # Log the git commit for reproducability
    logging.info("git hash: %s", git_hash())

    logging.info(args)

    # To help determine when output files get mixed together from different runs
    if output_folder_exists:
        logging.warning(
            "output folder %s already exists...saving new outputs to it", output_folder
        )

    return output_folder


def setup_logging(
    level: str, print_stdout: bool, filename: Optional[pathlib.Path] = None, stream=None
):
    """
    Sets up logging to write log messages to a stream and/or a file.

    Args:
        level (str): The logging level (one of "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL").
        print_stdout (bool): Whether to print log messages to stdout (or `stream` when given).
        filename (Optional[pathlib.Path]): The file to write log messages to (if specified).
        stream: Stream used instead of stdout, e.g. stderr when stdout carries a report.
    """
    handlers = []

    if print_stdout:
        handlers.append(logging.StreamHandler(stream if stream is not None else sys.stdout))

    if filename is not None:
        handlers.append(logging.FileHandler(filename=filename))

    levels = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }

    fmt = "%(asctime)s|%(levelname)s| %(message)s"
    logging.basicConfig(
        format=fmt,
        datefmt="%m-%d %H:%M:%S",
        level=levels[level.upper()],
        handlers=handlers,
        force=True,
    )


def jsonable(obj):
    """
    Convert a report structure into plain JSON types.

    Non-finite floats become None (an unconstrained margin is +inf), numpy
    scalars and arrays become Python numbers and lists, tuples become lists.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return jsonable(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    return obj


def dumps_report(dct) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(jsonable(dct), indent=2, sort_keys=True) + "\n"


def write_dict(dct, filename: pathlib.Path):
    """
    Write a dictionary to json file pretty printed.

    Args:
        dct (dict): A dictionary to be written to the file.
        filename (pathlib.Path): A path representing the file to write to.
    """
    filename.write_text(dumps_report(dct))


def write_metadata(cfg, output_folder: pathlib.Path):
    """
    Writes the configuration namespace to a metadata file in JSON format.

    Args:
        cfg (SimpleNamespace): The configuration to be written.
        output_folder (pathlib.Path): The folder where the metadata file should be written.
    """
    write_dict(cfg.__dict__, output_folder / "metadata.json")


def git_hash() -> str:
    """
    Get the git hash, or "unknown" when not run inside a git checkout.

    Returns:
        A str representing current git hash.
    """
    try:
        return (
            subprocess.check_output(["git", "rev-parse", "HEAD"], stderr=subprocess.DEVNULL)
            .decode("ascii")
            .strip()
        )
    except (OSError, subprocess.CalledProcessError):
        return "unknown"
