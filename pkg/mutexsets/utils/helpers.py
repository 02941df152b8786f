"""
Helper functions used throughout the application.
"""

import datetime
import hashlib
import logging
import math
import sys

import numpy as np
from scipy.special import gammaln

from mutexsets.utils.constants import (
    APP_NAME,
    DATETIME_FORMAT,
    FRACTION_FORMAT,
    KIND_SUFFIXES,
    LOG_FORMAT,
    PVALUE_FORMAT,
)

# Smallest log p-value that still exponentiates to a normal double
_LOG_FLOAT_MIN = -700.0


def setup_logging(verbosity=0):
    """
    Configure the package logger to write to standard error.

    Args:
        verbosity: 0 for INFO, positive for DEBUG, negative for WARNING

    Returns:
        logging.Logger: The configured package logger
    """
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO

    logger = logging.getLogger(APP_NAME)
    logger.setLevel(level)
    own = [handler for handler in logger.handlers if handler.name == APP_NAME]
    if own:
        # follow sys.stderr if it was replaced since the first call
        for handler in own:
            try:
                handler.setStream(sys.stderr)
            except ValueError:
                # the previous stream was closed before it could be flushed
                handler.stream = sys.stderr
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.name = APP_NAME
        handler.setFormatter(logging.Formatter(LOG_FORMAT, DATETIME_FORMAT))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


def format_datetime(dt=None):
    """
    Format a datetime object or current datetime.

    Args:
        dt: Datetime object to format (or None for current time)

    Returns:
        str: Formatted datetime string
    """
    if dt is None:
        dt = datetime.datetime.now()
    return dt.strftime(DATETIME_FORMAT)


def parse_row_label(label):
    """
    Split a row label of the form GENE, GENE(A) or GENE(D).

    Args:
        label: Row label from the matrix file

    Returns:
        tuple: (gene, kind) where kind is one of SNV, AMP, DEL
    """
    label = label.strip()
    for suffix, kind in KIND_SUFFIXES.items():
        if label.endswith(suffix) and len(label) > len(suffix):
            return label[: -len(suffix)], kind
    return label, "SNV"


def format_pvalue(value):
    """Format a p-value for reports, clamping adjusted values at 1."""
    return PVALUE_FORMAT.format(min(float(value), 1.0))


def format_log_pvalue(log_value):
    """
    Format a p-value given by its natural log, in the same style as format_pvalue.

    Values below the double-precision range keep their mantissa and exponent,
    so 1e-800 prints as 1.00e-800 instead of 0.
    """
    log_value = float(log_value)
    if log_value >= 0.0:
        return format_pvalue(1.0)
    if log_value == -math.inf:
        return format_pvalue(0.0)
    if log_value > _LOG_FLOAT_MIN:
        return format_pvalue(math.exp(log_value))
    log10 = log_value / math.log(10.0)
    exponent = math.floor(log10)
    mantissa = round(10.0 ** (log10 - exponent), 2)
    if mantissa >= 10.0:
        mantissa /= 10.0
        exponent += 1
    return f"{mantissa:.2f}e{exponent:+03d}"


def format_fraction(value):
    """Format a fraction in [0, 1] as a percentage."""
    return FRACTION_FORMAT.format(100.0 * float(value))


def log_binom(n, k):
    """Natural log of the binomial coefficient C(n, k); -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n)
    with np.errstate(invalid="ignore"):
        out = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    out = np.where(valid, out, -np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def set_key_string(labels):
    """Canonical text key of a set of row labels (sorted, comma-joined)."""
    return ",".join(sorted(labels))


def derive_uniform(master_seed, set_key, group):
    """
    Draw one Uniform(0, 1) value from a counter-based stream.

    The stream is keyed by (master seed, set key, group label), so the draw
    does not depend on evaluation order, worker count or row order.

    Args:
        master_seed: Run-level seed (non-negative integer)
        set_key: Canonical set key string (see set_key_string)
        group: Group label

    Returns:
        float: A value strictly inside (0, 1)
    """
    payload = f"{int(master_seed)}\x1f{set_key}\x1f{group}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    rng = np.random.Generator(np.random.Philox(key=key))
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return float(u)
