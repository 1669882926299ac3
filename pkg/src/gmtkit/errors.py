"""Exception types shared across modules."""


class NonConvergenceError(RuntimeError):
    """A limit/refinement schedule failed to stabilize."""


class ResolutionError(ValueError):
    """Requested radius or step is below what the lattice resolves."""


class RegimeError(ValueError):
    """Exponent (p, n) pair routed to the wrong embedding check."""


class UnderResolvedKernelError(ValueError):
    """Mollifier width too small for the grid spacing."""
