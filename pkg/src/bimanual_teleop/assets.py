"""Paths to packaged default assets (chains, config, reference library)."""

from importlib import resources


def asset_path(name: str) -> str:
    return str(resources.files("bimanual_teleop").joinpath("data", name))


def chain_path(side: str) -> str:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return asset_path(f"{side}_arm.chain")


def default_config_path() -> str:
    return asset_path("default.cfg")


def default_library_path() -> str:
    return asset_path("default_refs.lib")
