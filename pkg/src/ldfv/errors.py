"""Exception hierarchy shared by all modules."""


class LdfvError(Exception):
    """Base class for library errors."""


class ConfigurationError(LdfvError, ValueError):
    """Invalid user-supplied configuration (grid, boundary, model, CLI)."""


class ShapeError(LdfvError, ValueError):
    """Array or field shapes do not agree."""


class AdmissibilityError(LdfvError, ArithmeticError):
    """A state left the admissible set (negative density/pressure, NaN).

    ``cell`` is the flat interior index of the first offending cell when known,
    ``step`` the time-step index when raised from a time loop.
    """

    def __init__(self, message, cell=None, step=None, time=None):
        self.message = message
        self.cell = cell
        self.step = step
        self.time = time
        parts = [message]
        if cell is not None:
            parts.append(f"cell={cell}")
        if step is not None:
            parts.append(f"step={step}")
        if time is not None:
            parts.append(f"t={time:.6g}")
        super().__init__(", ".join(parts))

    def with_step(self, step, time=None):
        return AdmissibilityError(self.message, cell=self.cell, step=step, time=time)
