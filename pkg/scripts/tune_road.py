"""Pick the sine-road amplitude that carries the path past the obstacle.

The road is one rising half-wave ``Y = A (1 - cos(2 pi X / wavelength))``. For
each wavelength the amplitude is solved so the centerline passes a chosen
lateral offset to the right of the obstacle center; arc length and peak heading
are reported so the candidate can be checked against the state box.
"""

import argparse
import math

import numpy as np
from scipy.optimize import brentq

from lpvmpc.reference import RoadSpec, generate_sine_road

OBSTACLE = (29.4819, 17.4753)


def signed_offset(amplitude, wavelength):
    spec = RoadSpec(amplitude=amplitude, offset=amplitude, wavelength=wavelength)
    pts = np.array(generate_sine_road(spec, resolution=4000))
    k = int(np.argmin(np.hypot(pts[:, 0] - OBSTACLE[0], pts[:, 1] - OBSTACLE[1])))
    k = min(max(k, 1), len(pts) - 1)
    d = pts[k] - pts[k - 1]
    rel = np.array(OBSTACLE) - pts[k]
    # positive when the obstacle sits left of the path
    return (d[0] * rel[1] - d[1] * rel[0]) / np.hypot(*d), pts


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--offset", type=float, default=-0.3,
                        help="obstacle offset from the path, negative = right of the path")
    parser.add_argument("--wavelengths", type=float, nargs="+", default=[100, 120, 150, 200])
    args = parser.parse_args()
    for wl in args.wavelengths:
        try:
            amp = brentq(lambda a: signed_offset(a, wl)[0] - args.offset, 1.0, 80.0, xtol=1e-6)
        except ValueError:
            print(f"wavelength {wl:6.1f}: no amplitude reaches the obstacle")
            continue
        _, pts = signed_offset(amp, wl)
        arc = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        slope = amp * 2 * math.pi / wl
        print(f"wavelength {wl:6.1f}: amplitude {amp:8.4f}, arc length {arc:6.1f} m, "
              f"peak heading {math.degrees(math.atan(slope)):5.1f} deg, max Y {pts[:, 1].max():6.2f}")


if __name__ == "__main__":
    main()
