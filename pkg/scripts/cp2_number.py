"""Characteristic number of omega_2 for the Fubini-Study metric on CP^2.

Prints the integral at a few grid sizes so convergence is visible.
"""
import argparse
import time

from thetahat.numeric import characteristic_density, fubini_study_cp2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[16, 32, 48])
    args = ap.parse_args()
    for g in args.grids:
        fx = fubini_study_cp2(resolution=g)
        t0 = time.perf_counter()
        v = characteristic_density(fx, 2).integral(fx.domain)
        print(f"grid {g:>3}: {v.real:+.8f}  ({time.perf_counter() - t0:.1f}s)")
    print(fx.orientation_note)


if __name__ == "__main__":
    main()
