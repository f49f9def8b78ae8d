"""Seeded synthetic run-to-failure data with linear degradation.

Sensors track the health fraction (labeled RUL / cap) through fixed affine
maps plus Gaussian noise, so the noise level stated in label units holds for
every informative sensor. Two sensors are constant and one is pure noise to
exercise feature dropping and robustness. Used as the learnable oracle
dataset for forecaster and federation tests and by the data-generation CLI.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .ingest import DEFAULT_RUL_CAP, N_SENSORS, CycleRecord, UnitSeries
from .numerics import substream

CONSTANT_SENSOR_IDX = (5, 13)
NOISE_ONLY_SENSOR_IDX = 20


def make_linear_units(
    n_units: int = 20,
    seed: int = 42,
    rul_cap: float = DEFAULT_RUL_CAP,
    lifespan_range: Tuple[int, int] = (150, 220),
    noise_sigma: float | None = None,
    machine_id: int = 0,
) -> List[UnitSeries]:
    """Generate run-to-failure units whose sensors encode RUL linearly.

    noise_sigma is the per-sensor observation noise in label (cycle) units;
    defaults to 0.05 * rul_cap. machine_id perturbs the sensor coefficient set
    so different machines produce shifted, heterogeneous data distributions.
    """
    if noise_sigma is None:
        noise_sigma = 0.05 * rul_cap
    coef_rng = substream(seed, "synthetic-coefs", machine_id)
    offsets = coef_rng.uniform(-2.0, 2.0, size=N_SENSORS)
    gains = coef_rng.uniform(0.5, 3.0, size=N_SENSORS) * coef_rng.choice(
        [-1.0, 1.0], size=N_SENSORS
    )
    units: List[UnitSeries] = []
    for u in range(1, n_units + 1):
        rng = substream(seed, "synthetic-unit", machine_id, u)
        lifespan = int(rng.integers(lifespan_range[0], lifespan_range[1] + 1))
        records = []
        for t in range(1, lifespan + 1):
            rul = min(rul_cap, float(lifespan - t))
            health = rul / rul_cap
            noise = rng.normal(0.0, noise_sigma / rul_cap, size=N_SENSORS)
            sensors = offsets + gains * (health + noise)
            for idx in CONSTANT_SENSOR_IDX:
                sensors[idx] = offsets[idx]
            sensors[NOISE_ONLY_SENSOR_IDX] = rng.normal(0.0, 1.0)
            settings = (
                float(rng.normal(0.0, 0.001)),
                float(rng.normal(0.0, 0.001)),
                100.0,  # constant, mirrors a fixed operating condition
            )
            records.append(
                CycleRecord(
                    unit_id=u,
                    cycle=t,
                    op_settings=settings,
                    sensors=tuple(float(s) for s in sensors),
                )
            )
        units.append(UnitSeries(unit_id=u, records=records, failure_cycle=lifespan))
    return units


def split_units(
    units: List[UnitSeries], n_machines: int
) -> List[List[UnitSeries]]:
    """Round-robin partition into per-machine datasets."""
    parts: List[List[UnitSeries]] = [[] for _ in range(n_machines)]
    for i, unit in enumerate(units):
        parts[i % n_machines].append(unit)
    return parts
