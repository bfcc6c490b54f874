#!/usr/bin/env python3
"""List the curated SuiteSparse matrices used for large-scale benchmarking.

Matrix downloads are deliberately not part of the library; this script
prints the shortlist (name, collection group, application area, size)
together with download URLs so users can fetch the .mtx files themselves
and point ``sparsela bench-spmv`` / ``sparsela bench-solver`` at them.
"""

import argparse
import json
import sys

# (name, group, application area, rows, nonzeros)
MATRICES = [
    ("rajat31", "Rajat", "circuit simulation", 4_690_002, 20_316_253),
    ("atmosmodj", "Bourchtein", "computational fluid dynamics",
     1_270_432, 8_814_880),
    ("nlpkkt160", "Schenk", "nonlinear programming", 8_345_600, 225_422_112),
    ("thermal2", "Schmid", "unstructured thermal FEM", 1_228_045, 8_580_313),
    ("CurlCurl_4", "Bodendiek", "second-order Maxwell", 2_380_515, 26_515_867),
    ("Bump_2911", "Janna", "3D geomechanical model", 2_911_419, 127_729_899),
    ("Cube_Coup_dt0", "Janna", "3D coupled consolidation",
     2_164_760, 124_406_070),
    ("StocF-1456", "Janna", "flow in porous medium", 1_465_137, 21_005_389),
    ("circuit5M", "Freescale", "circuit simulation", 5_558_326, 59_524_291),
    ("FullChip", "Freescale", "circuit simulation", 2_987_012, 26_621_990),
]

PAGE = "https://sparse.tamu.edu/{group}/{name}"
TARBALL = "https://suitesparse-collection-website.herokuapp.com/MM/{group}/{name}.tar.gz"


def main(argv=None):
    parser = argparse.ArgumentParser(
        description=__doc__.splitlines()[0],
        epilog="After extracting a tarball, benchmark with e.g. "
               "sparsela bench-spmv --matrix rajat31/rajat31.mtx")
    parser.add_argument("--json", action="store_true",
                        help="emit the list as JSON instead of a table")
    parser.add_argument("--urls", action="store_true",
                        help="print one tarball URL per line (for xargs/wget)")
    args = parser.parse_args(argv)

    if args.urls:
        for name, group, _, _, _ in MATRICES:
            print(TARBALL.format(group=group, name=name))
        return 0

    if args.json:
        payload = [
            {"name": name, "group": group, "kind": kind, "rows": rows,
             "nonzeros": nz, "page": PAGE.format(group=group, name=name),
             "tarball": TARBALL.format(group=group, name=name)}
            for name, group, kind, rows, nz in MATRICES
        ]
        json.dump(payload, sys.stdout, indent=2)
        print()
        return 0

    header = f"{'name':<15} {'group':<11} {'application area':<28} " \
             f"{'rows':>10} {'nonzeros':>12}"
    print(header)
    print("-" * len(header))
    for name, group, kind, rows, nz in MATRICES:
        print(f"{name:<15} {group:<11} {kind:<28} {rows:>10,} {nz:>12,}")
    print()
    print("Pages:    " + PAGE.format(group="<group>", name="<name>"))
    print("Tarballs: " + TARBALL.format(group="<group>", name="<name>"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
