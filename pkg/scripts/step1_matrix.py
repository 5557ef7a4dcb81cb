"""Print the minimum increment of t^K V along separatrices for a grid of (alpha, p, u1).

Solutions that dip below their initial value are not monotone and are
reported as such instead of being transformed.
"""

import argparse
import math

from elslab import nonlinearity as N
from elslab import potential as P
from elslab.errors import DomainError
from elslab.shooting import ShootingConfig, find_els
from elslab.transformed import TransformConfig, check_tKV_monotone, to_transformed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", default="4,10,3")
    ap.add_argument("--powers", default="2,3")
    ap.add_argument("--u1", default="0.5,1,2,5")
    ap.add_argument("--D", type=int, default=3)
    ap.add_argument("--rmax", type=float, default=100.0)
    args = ap.parse_args()
    print("alpha,K,p,u1,b_star,min_increment")
    for alpha in map(float, args.alphas.split(",")):
        tc = TransformConfig(alpha, args.D)
        cfg = ShootingConfig(r_max=args.rmax, blowup_threshold=1e40 if alpha >= 8 else 1e12)
        for p in map(float, args.powers.split(",")):
            for u1 in map(float, args.u1.split(",")):
                sol = find_els(N.power(p), P.model(alpha), u1, cfg, args.D)
                try:
                    inc = check_tKV_monotone(to_transformed(sol, tc), tc)
                except DomainError:
                    inc = math.nan  # not monotone
                print(f"{alpha:g},{tc.K:.4g},{p:g},{u1:g},{sol.meta['b_star']:.12g},{inc:.6g}")


if __name__ == "__main__":
    main()
