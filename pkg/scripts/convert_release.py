#!/usr/bin/env python3
"""Write a chromalight manifest for a downloaded copy of the multi-white-balance dataset release.

Expected layout (provisional, adjust the patterns in chromalight.dataset when
the release differs):

    <root>/<scene>/<img>_<Setting>.exr          HDR panorama per setting
    <root>/<scene>/<img>_<Setting>_<cropidx>.jpg LDR crops
"""

import argparse
import sys
from pathlib import Path

from chromalight.dataset import MANIFEST_NAME, manifest_from_release_tree, validate_manifest, write_manifest


def main():
    parser = argparse.ArgumentParser(description="Convert a dataset release tree into a chromalight manifest")
    parser.add_argument("root", help="Root directory of the release")
    parser.add_argument(
        "-o", "--output",
        default=None,
        help=f"Manifest path (default: <root>/{MANIFEST_NAME})"
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        help="Exit non-zero when the manifest has validation issues"
    )
    args = parser.parse_args()

    root = Path(args.root)
    if not root.is_dir():
        print(f"Error: not a directory: {root}", file=sys.stderr)
        sys.exit(1)
    output = Path(args.output) if args.output else root / MANIFEST_NAME

    manifest = manifest_from_release_tree(root, manifest_dir=output.parent)
    issues = validate_manifest(manifest)
    write_manifest(manifest, output)

    print(f"Scenes: {len(manifest.scenes)}")
    print(f"Settings: {manifest.setting_count}")
    print(f"Manifest written to: {output}")
    if issues:
        print(f"\nValidation issues ({len(issues)}):")
        for issue in issues:
            print(f"  {issue.code.value}: {issue.scene_id or '-'}: {issue.detail}")
    sys.exit(1 if issues and args.strict else 0)


if __name__ == "__main__":
    main()
