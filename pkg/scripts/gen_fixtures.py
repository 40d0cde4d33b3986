"""Regenerate the shipped scene files from the in-package builders."""

from pathlib import Path

from splatnav.fixtures import FIXTURES
from splatnav.scene import save_scene

out = Path(__file__).resolve().parents[1] / "scenes"
out.mkdir(exist_ok=True)
for name, builder in FIXTURES.items():
    scene = builder()
    path = out / f"{scene.name}.json"
    save_scene(scene, path)
    print(f"wrote {path}")
