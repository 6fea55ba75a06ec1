"""Exception types shared across the package."""


class ImdelabError(Exception):
    """Base class for all package-specific failures."""


class UnboundParameter(ImdelabError):
    """A field expression references a parameter with no bound value."""


class ZeroConstantTerm(ImdelabError, ZeroDivisionError):
    """Division by a series whose constant term is (exactly) zero."""


class NoConvergence(ImdelabError):
    """A fixed-point stage solve failed to reach tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"fixed point not converged after {iterations} sweeps "
                         f"(residual {residual:.3e})")


class StepUnderflow(ImdelabError):
    """The adaptive reference integrator needed a step below 1e-12."""


class DegenerateError(ImdelabError):
    """One-step errors too close to roundoff for an order estimate."""


class NotWeaklyStable(ImdelabError):
    """Multistep scheme violates sum(m * alpha_m) != 0."""


class NotConsistent(ImdelabError):
    """Multistep scheme violates sum(alpha) = 0, sum(m*alpha) = sum(beta)."""


class UnknownMethodId(ImdelabError):
    """No closed-form truncation is shipped for this method id."""


class UnsupportedMethod(ImdelabError):
    """Method map cannot be expanded over jets."""


class UnknownProblem(ImdelabError):
    """Benchmark problem name not in the registry."""


class BadParams(ImdelabError):
    """Benchmark problem parameters outside the declared ranges."""


class OddDimension(ImdelabError):
    """Operation requires an even phase-space dimension."""


class NonFiniteLoss(ImdelabError):
    """Training loss became NaN or infinite."""


class NonPositiveError(ImdelabError):
    """Order computation needs two strictly positive errors."""


class ConfigError(ImdelabError):
    """Malformed experiment configuration file."""
