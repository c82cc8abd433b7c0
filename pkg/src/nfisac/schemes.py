"""Benchmark transmit-design schemes sharing one driver.

RSMA_HB    rate-splitting, hybrid architecture (full penalty BCD)
RSMA_FD    rate-splitting, fully digital (no factorization penalty)
RSMA_SC    rate-splitting hybrid, communication only (no CRB constraints)
SDMA_HB    no common stream, hybrid
RSMA_FAR   designed with far-field (planar-wavefront) channels, evaluated
           against the true near-field channels
"""

from __future__ import annotations

import enum

from . import driver, inner
from .geometry import (ChannelSet, Scenario, SensingModel, SystemGeometry,
                       build_channels, build_far_field_channels,
                       build_sensing_model)


class SchemeId(enum.Enum):
    RSMA_HB = "rsma_hb"
    RSMA_FD = "rsma_fd"
    RSMA_SC = "rsma_sc"
    SDMA_HB = "sdma_hb"
    RSMA_FAR = "rsma_far"


def scheme_options(scheme: SchemeId) -> inner.InnerOptions:
    if scheme == SchemeId.RSMA_FD:
        return inner.InnerOptions(include_penalty=False)
    if scheme == SchemeId.RSMA_SC:
        return inner.InnerOptions(include_crb=False)
    if scheme == SchemeId.SDMA_HB:
        return inner.InnerOptions(include_common=False)
    return inner.InnerOptions()


def run_scheme(
    scheme: SchemeId,
    geom: SystemGeometry,
    scenario: Scenario,
    schedule: driver.PenaltySchedule = driver.PenaltySchedule(),
    channels: ChannelSet | None = None,
    sensing: SensingModel | None = None,
) -> driver.SolveReport:
    """Design under the scheme's model, evaluate against the true one."""
    true_channels = channels if channels is not None else build_channels(geom, scenario)
    true_sensing = sensing if sensing is not None else build_sensing_model(geom, scenario)
    design_channels = true_channels
    eval_channels = None
    if scheme == SchemeId.RSMA_FAR:
        design_channels = build_far_field_channels(geom, scenario)
        eval_channels = true_channels
    return driver.penalty_bcd(
        geom, scenario, design_channels, true_sensing,
        schedule=schedule, opts=scheme_options(scheme),
        eval_channels=eval_channels)
