"""Command path and power models for the active roller units.

Wire format (11 bytes, big-endian, fixed point):

    offset  size  field
    0       1     protocol version (currently 1)
    1       1     unit id
    2       1     mode: 0 velocity, 1 target position
    3       4     value, signed 32-bit; micrometers (position mode) or
                  micrometers per second (velocity mode)
    7       2     sequence number, unsigned
    9       2     CRC-16/CCITT (poly 0x1021, init 0xFFFF) over bytes 0-8

Fixed-point micrometers keep the wire free of floats, so frames are
bit-exact across platforms.  The unit model reduces the onboard PID
velocity loop to first-order tracking with a 0.1 s time constant; the
speed cap comes from the 60 RPM motor turning a 19.5 mm shaft, one
revolution per second times the shaft circumference.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

PROTOCOL_VERSION = 1
MODE_VELOCITY = 0
MODE_POSITION = 1

SPEED_CAP = 0.0613            # m/s, (60/60 rev/s) * pi * 0.0195 m
ENCODER_RESOLUTION = 1e-4     # m per count
TIME_CONSTANT = 0.1           # s, first-order stand-in for the PID loop
BATTERY_CAPACITY_AH = 1.3
RADIO_IDLE_A = 0.0113

# second-order current-vs-pressure fit, anchored at 2.94 A / 76 kPa;
# coefficients are configuration (digitized from a measured curve), not
# ground truth
CURRENT_COEFFS = (0.936312, 0.0072846, 0.000251047)

_WIRE = struct.Struct(">BBBiH")
FRAME_SIZE = _WIRE.size + 2


class FrameError(ValueError):
    """Malformed frame: bad length, version, mode, or field range."""


class ChecksumError(FrameError):
    """Frame whose CRC does not match its payload."""


class SpeedCapError(ValueError):
    """Velocity command beyond what the motor can turn."""


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    crc = init
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def to_wire(value_m: float) -> int:
    """Meters (or m/s) to signed micrometer fixed point."""
    w = round(value_m * 1e6)
    if not -(1 << 31) <= w < (1 << 31):
        raise FrameError(f"value {value_m} m overflows 32-bit micrometers")
    return int(w)


def from_wire(value: int) -> float:
    return value * 1e-6


@dataclass(frozen=True)
class RollerCommandFrame:
    unit_id: int
    mode: int
    value: int                # wire units: um or um/s
    seq: int
    version: int = PROTOCOL_VERSION


def encode_frame(frame: RollerCommandFrame, *,
                 speed_cap: float = SPEED_CAP,
                 unit_count: int | None = None) -> bytes:
    if not 0 <= frame.unit_id < 256:
        raise FrameError(f"unit id {frame.unit_id} outside one byte")
    if unit_count is not None and frame.unit_id >= unit_count:
        raise FrameError(
            f"unit id {frame.unit_id} >= unit count {unit_count}")
    if frame.mode not in (MODE_VELOCITY, MODE_POSITION):
        raise FrameError(f"unknown mode {frame.mode}")
    if frame.mode == MODE_VELOCITY and abs(frame.value) > round(speed_cap * 1e6):
        raise SpeedCapError(
            f"commanded {from_wire(frame.value):.4f} m/s exceeds the "
            f"{speed_cap:.4f} m/s speed cap")
    if not 0 <= frame.seq < 65536:
        raise FrameError(f"sequence {frame.seq} outside two bytes")
    payload = _WIRE.pack(frame.version, frame.unit_id, frame.mode,
                         frame.value, frame.seq)
    return payload + struct.pack(">H", crc16_ccitt(payload))


def decode_frame(data: bytes, *,
                 unit_count: int | None = None) -> RollerCommandFrame:
    if len(data) != FRAME_SIZE:
        raise FrameError(f"frame is {len(data)} bytes, expected {FRAME_SIZE}")
    payload, (crc,) = data[:-2], struct.unpack(">H", data[-2:])
    if crc16_ccitt(payload) != crc:
        raise ChecksumError("frame checksum mismatch")
    version, unit_id, mode, value, seq = _WIRE.unpack(payload)
    if version != PROTOCOL_VERSION:
        raise FrameError(f"unknown protocol version {version}")
    if mode not in (MODE_VELOCITY, MODE_POSITION):
        raise FrameError(f"unknown mode {mode}")
    if unit_count is not None and unit_id >= unit_count:
        raise FrameError(f"unit id {unit_id} >= unit count {unit_count}")
    return RollerCommandFrame(unit_id=unit_id, mode=mode, value=value,
                              seq=seq, version=version)


# ---------------------------------------------------------------------------
# unit model


@dataclass(frozen=True)
class RollerUnitModel:
    """One active roller unit: tracking state plus its power budget.

    ``position`` is the true arc position; ``reported_position`` rounds it
    to the incremental encoder's grid.  ``pid_gains`` are carried for
    completeness but the simulator's contract is the first-order response.
    """

    position: float = 0.0
    velocity: float = 0.0
    speed_cap: float = SPEED_CAP
    encoder_resolution: float = ENCODER_RESOLUTION
    time_constant: float = TIME_CONSTANT
    pid_gains: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pressure_kpa: float = 76.0
    current_coeffs: tuple[float, float, float] = CURRENT_COEFFS
    capacity_ah: float = BATTERY_CAPACITY_AH
    charge_ah: float = BATTERY_CAPACITY_AH
    radio_idle_a: float = RADIO_IDLE_A
    depleted: bool = False

    @property
    def reported_position(self) -> float:
        return round(self.position / self.encoder_resolution) \
            * self.encoder_resolution


def motor_current(pressure_kpa: float,
                  coeffs: tuple[float, float, float] = CURRENT_COEFFS,
                  ) -> float:
    """Stall-free drive current at a tube pressure, A."""
    if pressure_kpa < 0.0:
        raise ValueError(f"pressure {pressure_kpa} kPa below zero")
    c0, c1, c2 = coeffs
    return c0 + c1 * pressure_kpa + c2 * pressure_kpa ** 2


def battery_endurance(capacity_ah: float, motor_a: float,
                      radio_a: float = RADIO_IDLE_A) -> float:
    """Continuous-operation endurance in minutes."""
    total = motor_a + radio_a
    if total <= 0.0:
        raise ValueError("endurance is undefined at zero draw")
    return 60.0 * capacity_ah / total


def step_unit(unit: RollerUnitModel, commanded: float,
              dt: float) -> RollerUnitModel:
    """Advance one unit by dt under a commanded velocity.

    Velocity relaxes toward the (capped) command exponentially and the
    position integral is exact, so position error against an ideal
    integrator telescopes to tau times the velocity change.  A stationary
    unit draws radio idle only; a depleted unit no longer drives.
    """
    cmd = float(min(max(commanded, -unit.speed_cap), unit.speed_cap))
    if unit.depleted:
        cmd = 0.0
    decay = math.exp(-dt / unit.time_constant)
    v_new = cmd + (unit.velocity - cmd) * decay
    pos = unit.position + cmd * dt \
        + (unit.velocity - cmd) * unit.time_constant * (1.0 - decay)

    draw = unit.radio_idle_a
    if cmd != 0.0 or abs(unit.velocity) > 1e-12:
        draw += motor_current(unit.pressure_kpa, unit.current_coeffs)
    charge = unit.charge_ah - draw * dt / 3600.0
    depleted = unit.depleted or charge <= 0.0
    return replace(unit, position=pos, velocity=v_new,
                   charge_ah=max(charge, 0.0), depleted=depleted)
