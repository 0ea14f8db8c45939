"""Bundled device profiles and user-profile discovery.

Bundled profiles are read-only package data. Extra profiles are picked up
from every ``*.json`` file in the directory named by ``EDGEWATT_PROFILE_DIR``;
a user profile replaces a bundled one with the same ``device_id``.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Dict, Optional

from ..arch import DeviceProfile

PROFILE_DIR_ENV = "EDGEWATT_PROFILE_DIR"


def load_profile(path) -> DeviceProfile:
    with open(path, encoding="utf-8") as fh:
        return DeviceProfile.from_dict(json.load(fh))


def save_profile(profile: DeviceProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile.to_dict(), fh, indent=2)
        fh.write("\n")


def bundled_profiles() -> Dict[str, DeviceProfile]:
    out = {}
    for entry in sorted(resources.files(__package__).iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            profile = DeviceProfile.from_dict(json.loads(entry.read_text(encoding="utf-8")))
            out[profile.device_id] = profile
    return out


def user_profiles(directory: Optional[str] = None) -> Dict[str, DeviceProfile]:
    directory = directory if directory is not None else os.environ.get(PROFILE_DIR_ENV)
    if not directory:
        return {}
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"{PROFILE_DIR_ENV} is not a directory: {root}")
    out = {}
    for path in sorted(root.glob("*.json")):
        try:
            profile = load_profile(path)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: {exc}") from None
        out[profile.device_id] = profile
    return out


def all_profiles(directory: Optional[str] = None) -> Dict[str, DeviceProfile]:
    """Bundled profiles overlaid with user profiles (user wins on id)."""
    merged = bundled_profiles()
    merged.update(user_profiles(directory))
    return merged


def resolve_device(device_id: str, directory: Optional[str] = None) -> DeviceProfile:
    profiles = all_profiles(directory)
    try:
        return profiles[device_id]
    except KeyError:
        known = ", ".join(sorted(profiles)) or "none"
        raise KeyError(f"unknown device {device_id!r} (known: {known})") from None
