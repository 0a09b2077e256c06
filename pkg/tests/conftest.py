"""Shared scenario builders for the test suite."""

from dwlan.mac import FairnessParams, MacParams
from dwlan.phy import PhyParams
from dwlan.scenario import ScenarioTemplate
from dwlan.topology import Intensities, RadioParams


def make_template(
    eta_n=0.5,
    eta_m=0.2,
    area=(200.0, 200.0),
    n_ref=200.0,
    num_tx=2,
    num_rx=4,
    gamma=1.0,
    delta=0.5,
    weight_iterations=1,
    mac=None,
    **radio_kw,
) -> ScenarioTemplate:
    radio = RadioParams(**radio_kw)
    return ScenarioTemplate(
        intensities=Intensities(eta_n, eta_m, n_ref),
        area=area,
        radio=radio,
        phy=PhyParams.from_radio(radio, num_tx, num_rx),
        mac=mac if mac is not None else MacParams(),
        fairness=FairnessParams(delta),
        gamma=gamma,
        weight_iterations=weight_iterations,
    )


def small_scenario(n_sta, n_ap, seed, **kw):
    """Fixed-count scenario in a compact area so links are in range."""
    kw.setdefault("area", (120.0, 120.0))
    return make_template(**kw).build_fixed(n_sta, n_ap, seed)
