"""Built-in tariff scenarios.

Every fixed-part scenario keeps the annual bill of a 5 MWh pure consumer at
1500 EUR: lowering the volumetric charge by 5 ct/kWh adds 250 EUR/year to
the fixed part.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from core.scenarios.config import ScenarioConfig, TariffConfig, slugify

BASELINE = "Retail_30 FIT_8"


def _scenario(name: str, description: str, **tariff) -> ScenarioConfig:
    return ScenarioConfig(name=name, description=description, tariff=TariffConfig(**tariff))


def _volumetric() -> List[ScenarioConfig]:
    out = []
    for cents in (8, 6, 4, 2):
        label = "baseline" if cents == 8 else f"feed-in tariff {cents} ct/kWh"
        out.append(_scenario(f"Retail_30 FIT_{cents}", label, feed_in_rate=cents / 100.0))
    out.append(_scenario("Retail_30 FIT_0", "no feed-in", feed_in="prohibited", feed_in_rate=0.0))
    out.append(
        _scenario(
            "Retail_30 FIT_8 Cap",
            "feed-in capped at half the installed PV capacity",
            feed_in_rate=0.08,
            feed_in_cap_fraction=0.5,
        )
    )
    return out


def _fixed_part() -> List[ScenarioConfig]:
    out = []
    for step, retail in enumerate((25, 20, 15), start=1):
        other = (retail - 5) / 100.0
        fixed = 250.0 * step
        out.append(
            _scenario(
                f"Retail_{retail} FIT_8",
                f"{fixed:g} EUR/year fixed charge",
                other_charge=other,
                fixed_charge=fixed,
                feed_in_rate=0.08,
            )
        )
        out.append(
            _scenario(
                f"Retail_{retail} FIT_0",
                f"{fixed:g} EUR/year fixed charge, no feed-in",
                other_charge=other,
                fixed_charge=fixed,
                feed_in="prohibited",
                feed_in_rate=0.0,
            )
        )
    return out


def _real_time() -> List[ScenarioConfig]:
    return [
        _scenario("Retail_30 FIT_RTP", "feed-in at the wholesale price", feed_in="rtp", feed_in_rate=0.0),
        _scenario("Retail_RTP FIT_5", "real-time energy charge", energy_rtp=True, feed_in_rate=0.05),
        _scenario(
            "Retail_RTP FIT_RTP",
            "real-time energy charge and feed-in",
            energy_rtp=True,
            feed_in="rtp",
            feed_in_rate=0.0,
        ),
        _scenario(
            "Retail_RTP FIT_RTP+3",
            "real-time prices with a 3 ct/kWh feed-in premium",
            energy_rtp=True,
            feed_in="rtp",
            feed_in_rate=0.03,
        ),
    ]


def builtin_catalog() -> List[ScenarioConfig]:
    """The 16 tariff scenarios, volumetric ones first, real-time pricing last."""
    return _volumetric() + _fixed_part() + _real_time()


def catalog_index() -> Dict[str, ScenarioConfig]:
    return {cfg.name: cfg for cfg in builtin_catalog()}


def find_scenario(name: str) -> Optional[ScenarioConfig]:
    """Look a scenario up by exact name, case-insensitive name or slug."""
    wanted = slugify(name)
    for cfg in builtin_catalog():
        if cfg.name == name or cfg.name.lower() == name.lower() or cfg.slug == wanted:
            return cfg
    return None
