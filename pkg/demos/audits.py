"""Condition audits for the built-in models.

Rows marked * are informational.  The alpha=1.5 stable-type model fails D
(its row density behaves like |u|**(1-alpha) at the origin, so it is not
square integrable), and the unnormalized kernel fails A.
"""
from lltlab.array import model_from_name
from lltlab.cli import render_audit_table
from lltlab.rates import audit_all

for name in ["example1:alpha=0.5", "example1:alpha=1", "example1:alpha=1.5",
             "example2", "gauss", "broken"]:
    audits = audit_all(model_from_name(name))
    verdict = "pass" if all(a.passed for a in audits if a.required) else "FAIL"
    print(f"\n== {name}: {verdict}")
    print(render_audit_table(audits))
