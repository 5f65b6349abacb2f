"""Exception types shared across the package."""


class HvacOptError(Exception):
    """Base class for all package errors."""


class ConfigError(HvacOptError):
    """Invalid parameters, scenario files, or violated model invariants."""


class DimensionMismatchError(ConfigError):
    """A vector argument does not match the zone count."""

    def __init__(self, name: str, expected: int, got: int):
        self.name = name
        self.expected = expected
        self.got = got
        super().__init__(f"vector '{name}' has length {got}, expected {expected}")


class SupplyTempSingularityError(HvacOptError):
    """A temperature hit the supply-air temperature, making 1/(Z - T_s) blow up."""

    def __init__(self, zone: int | None, value: float, supply: float):
        self.zone = zone
        self.value = value
        self.supply = supply
        where = f"zone {zone}: " if zone is not None and zone >= 0 else ""
        super().__init__(
            f"{where}temperature {value:.6g} degC is on the wrong side of / too "
            f"close to the supply temperature {supply:.6g} degC (singular denominator)"
        )


class NumericalBlowupError(HvacOptError):
    """Integration produced a non-finite or absurd state."""

    def __init__(self, time: float, zone: int, value: float):
        self.time = time
        self.zone = zone
        self.value = value
        super().__init__(
            f"non-finite/diverged state at t={time:.3f} s, zone {zone}: value {value!r}"
        )


class InfeasibleError(HvacOptError):
    """The steady-state problem has no (strictly) feasible point."""


class NonStationaryWindowError(HvacOptError):
    """An audit window is too short or not quasi-steady."""
