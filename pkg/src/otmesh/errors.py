"""Exception hierarchy shared by all otmesh modules."""


class OTMeshError(Exception):
    """Base class for errors raised by otmesh."""


class DegenerateElementError(OTMeshError, ValueError):
    """A Jacobian (or metric) is singular where a nonsingular one is required."""


class TangledMeshError(OTMeshError, ValueError):
    """The discrete Jacobian determinant is non-positive at some node."""

    def __init__(self, node, det):
        self.node = tuple(int(k) for k in node)
        self.det = float(det)
        super().__init__(f"tangled mesh: det J = {self.det:.3e} at node {self.node}")


class DensityError(OTMeshError, ValueError):
    """A density function is non-positive or otherwise unusable."""


class ConvexityError(OTMeshError, RuntimeError):
    """The mesh potential lost convexity during relaxation."""

    def __init__(self, iteration, min_hessian):
        self.iteration = int(iteration)
        self.min_hessian = float(min_hessian)
        super().__init__(
            f"mesh potential lost convexity at iteration {self.iteration} "
            f"(min H(P) = {self.min_hessian:.3e})"
        )


class ConvergenceError(OTMeshError, RuntimeError):
    """The relaxation did not reach its tolerance within the iteration budget."""

    def __init__(self, iterations, residual, tolerance):
        self.iterations = int(iterations)
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        super().__init__(
            f"no convergence after {self.iterations} iterations: "
            f"residual {self.residual:.3e} > tolerance {self.tolerance:.1e}"
        )


class CFLError(OTMeshError, ValueError):
    """A time step exceeds the explicit stability limit."""

    def __init__(self, dt, dt_max):
        self.dt = float(dt)
        self.dt_max = float(dt_max)
        super().__init__(f"dt = {self.dt:.3e} exceeds the CFL limit; use dt <= {self.dt_max:.3e}")
