"""Evaluate the existence and stability criteria on the Laplacian example.

The example keeps 8 Dirichlet-Laplacian modes with alpha = 5/3 and p = 2.
Its coefficients are Lipschitz with the quoted a_hat constants.  The script
prints every addend of both criteria, the constants behind them and their
provenance, then the contractor inequality check.
"""
import json

from fracsde import (check_contractor_conditions, criteria_report, example_problem,
                     resolve_constants)


def main():
    spec = example_problem()
    c = resolve_constants(spec)
    print(f"problem {spec.name!r}: alpha = {spec.alpha:.6g}, p = {spec.p:g}, "
          f"{spec.modes} modes, horizon {spec.horizon:g}")
    print("\nconstants and where they came from:")
    for name, source in c.provenance.items():
        print(f"  {name:16s} {source}")

    report = criteria_report(spec, c)
    for key in ("existence", "stability"):
        r = report[key]
        print(f"\n{key} criterion: theta = {r['theta']:.10g} ({'PASS' if r['pass'] else 'FAIL'})")
        for item, value in r["items"].items():
            print(f"  {item:18s} {value:.6e}")
        for note in r["notes"]:
            print(f"  note: {note}")
        ref = r.get("reference")
        if ref:
            print(f"  quoted value {ref['reference']:g}; deviation {ref['abs_deviation']:+.4g}, "
                  f"verdicts agree: {ref['verdicts_agree']}")

    cc = check_contractor_conditions(spec, sample_count=200, seed=1)
    print("\ncontractor inequalities (all contractors zero, so plain Lipschitz bounds):")
    print(json.dumps(cc.to_dict(), indent=2))


if __name__ == "__main__":
    main()
