"""
Racial gap in mortgage denials: the full command-line workflow
==============================================================

Runs the three analyses on the Boston HMDA mortgage data: sorted
effects of being black on the denial probability under a logit model,
classification of the 10% most and least affected applicants, and
confidence sets for those groups.

The data file is not shipped with the package.  Export the 1990 Boston
HMDA extract (2,380 applications) to ``data/mortgage.csv`` with columns
``deny, black, p_irat, hse_inc, ccred, mcred, pubrec, denpmi, ltv_med,
ltv_high, selfemp, single, hischl`` (all numeric, one row per
application).  Without the file this script just prints what it would
run.
"""

import os
import shlex
import sys

from sorted_effects.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.environ.get(
    "SORTED_EFFECTS_MORTGAGE",
    os.path.join(HERE, os.pardir, "data", "mortgage.csv"),
)
FM = ("deny ~ black + p_irat + hse_inc + ccred + mcred + pubrec + ltv_med"
      " + ltv_high + denpmi + selfemp + single + hischl")
T = ("deny,p_irat,black,hse_inc,ccred,mcred,pubrec,denpmi,selfemp,single,"
     "hischl,ltv_med,ltv_high")

common = ["--data", DATA, "--fm", FM, "--method", "logit", "--var", "black",
          "-b", "500", "--seed", "1", "--alpha", "0.1"]
runs = [
    # SPE/APE over the 2nd..98th percentiles, bias corrected
    ["spe", *common, "--us", "2:98/100", "--out-dir", "mortgage_out/spe"],
    # mean characteristics of the 10% most/least affected applicants
    ["ca", *common, "--t", T, "--cl", "both",
     "--out-dir", "mortgage_out/ca"],
    # differences between the groups with joint p-values
    ["ca", *common, "--t", T, "--cl", "diff",
     "--out-dir", "mortgage_out/ca_diff"],
    # membership and summary tables for the affected groups
    ["subpop", *common, "--u", "0.1", "--vars", "p_irat,hse_inc",
     "--varx", "p_irat", "--vary", "hse_inc",
     "--out-dir", "mortgage_out/subpop"],
]

if not os.path.exists(DATA):
    print(f"mortgage data not found at {DATA}")
    print("place the file there (or set SORTED_EFFECTS_MORTGAGE) and rerun;")
    print("the workflow would execute:")
    for argv in runs:
        print("  " + shlex.join(["sorted-effects", *argv]))
    sys.exit(0)

for argv in runs:
    print("running:", " ".join(argv[:1] + argv[-2:]))
    rc = main(argv)
    if rc:
        sys.exit(rc)
print("done; see mortgage_out/*/")
