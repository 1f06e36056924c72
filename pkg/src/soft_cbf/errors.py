"""Exception types shared by both kernel backends."""


class ConfigurationShapeError(ValueError):
    """Configuration vector does not match the model's active strains."""


class DegenerateTangentError(ValueError):
    """Tendon tangent argument collapsed to zero norm."""


class InfeasibleCBFError(ValueError):
    """Barrier is violated and the inputs have no authority over it."""


class IntegrationBlowupError(FloatingPointError):
    """Non-finite stage encountered during a Runge-Kutta step."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class StartInCollisionError(ValueError):
    """Planner start configuration violates a sphere-obstacle barrier."""
