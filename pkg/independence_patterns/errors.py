"""
errors.py

Exception hierarchy shared by the library and the command-line surface.
Library code raises; main.py maps each family to a process exit code.
"""
from typing import Optional, Sequence


class IndependencePatternsError(Exception):
    """Base class for all package errors."""
    exit_code = 1


class InputError(IndependencePatternsError):
    """Malformed input, invalid argument or bad configuration."""
    exit_code = 2


class ResourceGuardError(IndependencePatternsError):
    """A size guard tripped before memory or time could run away."""
    exit_code = 3


class NumericalError(IndependencePatternsError):
    """A score could not be evaluated (singular matrix, bad gamma argument)."""
    exit_code = 4


class DegenerateBlockError(NumericalError):
    """Raised when a block matrix is not positive definite."""
    def __init__(self, message: str, block: Optional[Sequence[int]] = None) -> None:
        super().__init__(message)
        self.block = tuple(block) if block is not None else None


class SamplerError(NumericalError):
    """Scorer failure surfaced from inside a chain, with chain/step context."""
    def __init__(self, message: str, chain: int, step: int) -> None:
        super().__init__(f"chain {chain}, step {step}: {message}")
        self.chain = chain
        self.step = step
