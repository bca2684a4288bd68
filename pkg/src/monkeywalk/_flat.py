"""Flat numeric codes that hand models to the compiled engines."""
import math

import numpy as np

from . import _engines
from .kernel import Deterministic, DiscreteUniform, Exponential, Geometric, Mu1, discrete_table
from .process import BrownianMotion, GenericRW, HeavyTailedRW, LazySRW


def kernel_codes(kernel):
    if isinstance(kernel, Mu1):
        return 0, float(kernel.alpha), float(kernel.beta)
    return 1, float(kernel.gamma), float(kernel.delta)


def runlen_codes(dist):
    if isinstance(dist, Geometric):
        return 0, float(dist.q)
    if isinstance(dist, Deterministic):
        return 1, float(dist.c)
    if isinstance(dist, DiscreteUniform):
        return 2, float(dist.k)
    if isinstance(dist, Exponential):
        return 3, float(dist.rate)
    raise TypeError(dist)


def process_codes(model):
    if isinstance(model, LazySRW):
        return 0, model.d, float(model.p_lazy), 0.0
    if isinstance(model, GenericRW):
        return (1 if model.law == "normal" else 2), model.d, float(model.mean), float(model.sd)
    if isinstance(model, HeavyTailedRW):
        return 3, 1, float(model.omega), 0.0
    if isinstance(model, BrownianMotion):
        return 4, model.d, float(model.drift), 0.0
    raise TypeError(model)


def kernel_table(kernel, axis, horizon):
    """(linear?, table) for the compiled engines: discrete partial sums of mu,
    as logs unless they fit comfortably in double precision."""
    kc, ka, kb = kernel_codes(kernel)
    lin = _engines.linear_safe(kc, ka, kb, horizon)
    if axis == "discrete":
        tab = discrete_table(kernel, int(math.ceil(horizon)) + 2)
        return lin, (tab.cum if lin else tab.log_cum)
    return lin, np.zeros(1)
