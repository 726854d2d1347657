"""Regenerate the shipped angular quadrature table.

Usage: python3 scripts/gen_angular_table.py [K]

The table is the Gauss-Legendre x uniform-azimuth product rule with
2K+2 polar and 4K+4 azimuthal nodes; it integrates spherical harmonics of
degree <= 4K+3 exactly. The default K matches gradsing.fields.DEFAULT_ANGULAR_K.
"""

import sys
from pathlib import Path

from gradsing.fields import DEFAULT_ANGULAR_K, gauss_product_set, write_angular_table


def main():
    K = int(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_ANGULAR_K
    out = Path(__file__).resolve().parents[1] / "src" / "gradsing" / "data" / f"angular_gauss_K{K}.csv"
    write_angular_table(gauss_product_set(K), out)
    print(out)


if __name__ == "__main__":
    main()
