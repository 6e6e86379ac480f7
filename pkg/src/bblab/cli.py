"""Command-line front end: one `bblab` entry point with subcommands.

    bblab supconv        --f A.gfn --g B.gfn --lambda 1/2 --p -0.25 --out H.gfn
    bblab hull           --f A.gfn --p 0 --out H.gfn --report gaps.csv
    bblab diagnose       --f A.gfn --g B.gfn --h H.gfn --lambda 1/2 --p 0 --alpha 0.1 --out diag.csv
    bblab certify-symdiff --f A.gfn --g B.gfn --h H.gfn --lambda 1/2 --p 0 --report out.csv
    bblab certify-linear  --f A.gfn [--h H.gfn] --lambda 1/2 --p 0 --c 0.05 --report out.csv
    bblab certify-main    --f A.gfn --g B.gfn --h H.gfn --lambda 1/2 --p 0 --report out.csv
    bblab sweep          --family sharpness --p 0 --lambda 1/2 --delta0 1e-4:1e-2:log8 --spacing 1e-4 --out sweep.csv
    bblab equipartition  --f A.gfn

Exit code 0 iff every validity flag passes (and the equipartition converges).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import lab
from .gridfn import dump_gfn, load_gfn
from .hull import p_concave_hull
from .means import MeanParams
from .stability import (
    certify_linear,
    certify_main,
    certify_symmetric_difference,
    cone_equipartition_2d,
)
from .supconv import sup_convolution
from .transport import level_diagnostics


def _parse_lambda(text: str) -> Fraction:
    return Fraction(text)


def _parse_delta0(text: str):
    """'a:b:logN' -> N log-spaced values; 'a:b:N' linear; or a comma list."""
    if ":" in text:
        a, b, n = text.split(":")
        lo, hi = float(a), float(b)
        if n.startswith("log"):
            return np.geomspace(lo, hi, int(n[3:])).tolist()
        return np.linspace(lo, hi, int(n)).tolist()
    return [float(t) for t in text.split(",")]


def _params(args) -> MeanParams:
    return MeanParams(_parse_lambda(args.lam), args.p, args.n)


def _add_common(sp, g=False, h=False, h_optional=False):
    sp.add_argument("--f", required=True, help="GFN1 input for f")
    if g:
        sp.add_argument("--g", required=True, help="GFN1 input for g")
    if h:
        sp.add_argument("--h", required=not h_optional, help="GFN1 input for h")
    sp.add_argument("--lambda", dest="lam", default="1/2", help="rational weight, e.g. 1/2")
    sp.add_argument("--p", type=float, default=0.0, help="mean exponent")
    sp.add_argument("--n", type=int, default=1, help="ambient dimension for the parameter check")


def _report_certificate(rep, path):
    header = (
        "delta,shift,symdiff_distance,linear_gap,main_distance,"
        "ratio_sqrt,ratio_linear,ratio_main,valid"
    )
    shift = "" if rep.best_shift is None else ";".join(str(v) for v in rep.best_shift)
    line = ",".join(
        [
            repr(rep.delta),
            shift,
            repr(rep.symdiff_distance),
            repr(rep.linear_gap),
            repr(rep.main_distance),
            repr(rep.ratio_sqrt),
            repr(rep.ratio_linear),
            repr(rep.ratio_main),
            "1" if rep.hypothesis_valid else "0",
        ]
    )
    if path:
        with open(path, "w") as fh:
            fh.write(header + "\n" + line + "\n")
    print(header)
    print(line)
    return rep.hypothesis_valid


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bblab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("supconv", help="sup-convolution of two grid functions")
    _add_common(sp, g=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("hull", help="p-concave hull")
    sp.add_argument("--f", required=True)
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report", default=None, help="per-cell gap CSV")

    sp = sub.add_parser("diagnose", help="level-set diagnostics")
    _add_common(sp, g=True, h=True)
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("certify-symdiff", help="symmetric-difference certificate")
    _add_common(sp, g=True, h=True)
    sp.add_argument("--report", default=None)

    sp = sub.add_parser("certify-linear", help="linear certificate (f = g)")
    _add_common(sp, h=True, h_optional=True)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--report", default=None)

    sp = sub.add_parser("certify-main", help="combined certificate")
    _add_common(sp, g=True, h=True)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--report", default=None)

    sp = sub.add_parser("sweep", help="scenario sweep to CSV")
    sp.add_argument("--family", required=True, choices=["sharpness", "dented"])
    sp.add_argument("--lambda", dest="lam", default="1/2")
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--delta0", required=True, help="a:b:logN, a:b:N, or comma list")
    sp.add_argument("--spacing", type=float, default=1e-4)
    sp.add_argument("--certificates", default="symdiff", choices=["symdiff", "linear", "main"])
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("equipartition", help="2-D cone equipartition apex")
    sp.add_argument("--f", required=True)

    args = ap.parse_args(argv)

    if args.cmd == "supconv":
        f, g = load_gfn(args.f), load_gfn(args.g)
        dump_gfn(sup_convolution(f, g, _params(args)), args.out)
        return 0

    if args.cmd == "hull":
        f = load_gfn(args.f)
        res = p_concave_hull(f, args.p)
        dump_gfn(res.hull, args.out)
        if args.report:
            with open(args.report, "w") as fh:
                fh.write("cell,x,f,hull,gap\n")
                cells = np.argwhere(res.hull.values > 0)
                for cell in cells:
                    idx = tuple(int(v) for v in cell)
                    x = tuple(
                        f.origin[d] + (idx[d] + 0.5) * f.spacing for d in range(f.dim)
                    )
                    fv = float(f.values[idx])
                    hv = float(res.hull.values[idx])
                    fh.write(
                        f"{';'.join(str(i) for i in idx)},{';'.join(repr(v) for v in x)},"
                        f"{fv!r},{hv!r},{hv - fv!r}\n"
                    )
        print(f"gap_mass={res.gap_mass!r} facets={len(res.facets)}")
        return 0

    if args.cmd == "diagnose":
        f, g, h = load_gfn(args.f), load_gfn(args.g), load_gfn(args.h)
        rep = level_diagnostics(f, g, h, _params(args), args.alpha)
        header = "alpha,I1,I2,I3,I4,I5,hull_gap_integral,h_convention"
        line = ",".join(
            [repr(rep.alpha)]
            + [repr(m) for m in rep.masses]
            + [repr(rep.hull_gap_integral), rep.h_convention]
        )
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(header + "\n" + line + "\n")
        print(header)
        print(line)
        return 0

    if args.cmd == "certify-symdiff":
        f, g, h = load_gfn(args.f), load_gfn(args.g), load_gfn(args.h)
        rep = certify_symmetric_difference(f, g, h, _params(args))
        return 0 if _report_certificate(rep, args.report) else 1

    if args.cmd == "certify-linear":
        f = load_gfn(args.f)
        h = load_gfn(args.h) if args.h else None
        rep = certify_linear(f, _params(args), h=h, c=args.c, verify=h is not None)
        return 0 if _report_certificate(rep, args.report) else 1

    if args.cmd == "certify-main":
        f, g, h = load_gfn(args.f), load_gfn(args.g), load_gfn(args.h)
        rep = certify_main(f, g, h, _params(args), c=args.c)
        return 0 if _report_certificate(rep, args.report) else 1

    if args.cmd == "sweep":
        params = MeanParams(_parse_lambda(args.lam), args.p, args.n)
        rows = lab.sweep(
            args.family,
            _parse_delta0(args.delta0),
            params,
            spacing=args.spacing,
            certificates=args.certificates,
            c=args.c,
            seed=args.seed,
        )
        ok = lab.write_csv(rows, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0 if ok else 1

    if args.cmd == "equipartition":
        f = load_gfn(args.f)
        res = cone_equipartition_2d(f)
        print(f"apex={res.apex!r} masses={res.masses!r} residual={res.residual!r}")
        return 0 if res.converged else 1

    return 2


if __name__ == "__main__":
    sys.exit(main())
