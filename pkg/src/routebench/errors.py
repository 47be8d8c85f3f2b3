"""Error types shared across the library."""


class CapacityError(ValueError):
    """An exact oracle was asked for an instance above its hard size cap."""


class InfeasibleError(ValueError):
    """The fairness program has no feasible mixture.

    Attributes:
        population: index of the population whose constraint is violated.
    """

    def __init__(self, message: str, population: int):
        super().__init__(message)
        self.population = population
