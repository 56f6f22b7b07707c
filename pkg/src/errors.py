"""Exception hierarchy and CLI exit codes"""

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2


class GPError(Exception):
    """Base class for every error raised by the engine"""


class ConfigError(GPError, ValueError):
    """Invalid experiment configuration (exit code 1)"""


class DatasetError(ConfigError):
    """Dataset cannot be loaded or split"""


class MalformedTreeError(GPError):
    """A tree violates arity, layer typing, bounds or depth"""


class UsageError(GPError, ValueError):
    """An operation was called with arguments outside its contract"""


class EvaluationError(GPError):
    """A fitness worker failed; the generation is discarded"""


class StaleFitnessError(GPError):
    """Selection saw a fitness computed on a different batch"""


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit status"""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    return EXIT_RUNTIME_ERROR
