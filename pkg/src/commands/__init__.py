from src.errors import InputError, IoFailure
from src.settings import LOGGER

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3


def run_command(command, *args, **kwargs):
    """
    Runs a command function and maps pipeline errors to exit statuses.

    Returns:
        int: 0 on success, 2 on input errors, 3 on I/O failures.
    """
    try:
        command(*args, **kwargs)
    except InputError as exc:
        LOGGER.error(f"{type(exc).__name__}: {exc}")
        return EXIT_INPUT
    except IoFailure as exc:
        LOGGER.error(f"{type(exc).__name__}: {exc}")
        return EXIT_IO
    return EXIT_OK
