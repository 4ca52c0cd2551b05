"""Run YAML presets from configs/ and print the headline numbers of each.

    python3 scripts/run_presets.py                 # every preset except the slow 11-site ED
    python3 scripts/run_presets.py ring50 torus30  # selected presets
"""

import argparse
import json
from pathlib import Path

import yaml

from bhquench.config import validate
from bhquench.runner import execute

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SLOW = {"correlations_1d"}


def summarize(name, manifest, out):
    res = manifest["results"]
    print(f"== {name} ({manifest['wall_time_s']:.1f} s) -> {out}")
    if "fronts" in res:
        for f in res["fronts"]:
            print(f"   front {f['direction']:8s} theta={f['threshold']:.4g} v={f['velocity']:.4f} "
                  f"v_group={f['group_velocity']:.4f} ratio={f['ratio']:.3f}")
    for key, val in res.items():
        if key != "fronts":
            print(f"   {key}: {json.dumps(val)}")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("presets", nargs="*", help="preset names (file stems in configs/)")
    parser.add_argument("--output-root", type=Path, default=None, help="write under this directory instead")
    args = parser.parse_args()
    names = args.presets or sorted(p.stem for p in CONFIGS.glob("*.yaml") if p.stem not in SLOW)
    for name in names:
        cfg = validate(yaml.safe_load((CONFIGS / f"{name}.yaml").read_text()))
        out = args.output_root / name if args.output_root else None
        summarize(name, execute(cfg, out), out or cfg.output_dir)


if __name__ == "__main__":
    main()
