import logging
import sys

from strata.exceptions.model_exceptions import StrataException

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC_SETUP = 3
EXIT_NONCONVERGENCE = 4
EXIT_INTERNAL = 5

ERROR_KINDS = {
    EXIT_INPUT: "INPUT_ERROR",
    EXIT_NUMERIC_SETUP: "NUMERIC_SETUP_ERROR",
    EXIT_NONCONVERGENCE: "NONCONVERGENCE",
    EXIT_INTERNAL: "INTERNAL_ERROR",
}


def catch_strata_exception(exc: StrataException) -> int:
    code = exc.exit_code
    print(f"strata: {ERROR_KINDS[code]}: {exc.message}", file=sys.stderr)
    log.debug(f"{type(exc).__name__} mapped to exit code {code}")
    return code


def catch_unexpected(exc: Exception) -> int:
    log.exception("Unexpected failure")
    print(f"strata: {ERROR_KINDS[EXIT_INTERNAL]}: {exc!r}", file=sys.stderr)
    return EXIT_INTERNAL


def catch(exc: Exception) -> int:
    if isinstance(exc, StrataException):
        return catch_strata_exception(exc)
    return catch_unexpected(exc)
