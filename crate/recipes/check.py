#!/usr/bin/env python3
"""Assert on a summary.json value.

usage: check.py DIR KEY.PATH approx VALUE TOL
       check.py DIR KEY.PATH equals VALUE
       check.py DIR KEY.PATH between LO HI
"""
import json
import sys

out, path, op, *args = sys.argv[1:]
value = json.load(open(f"{out}/summary.json"))
for part in path.split("."):
    value = value[int(part)] if isinstance(value, list) else value[part]

if op == "approx":
    target, tol = map(float, args)
    ok = abs(float(value) - target) <= tol
elif op == "equals":
    ok = str(value) == args[0]
elif op == "between":
    lo, hi = map(float, args)
    ok = lo <= float(value) <= hi
else:
    sys.exit(f"unknown op {op}")

print(f"{'PASS' if ok else 'FAIL'} {path} = {value} ({op} {' '.join(args)})")
sys.exit(0 if ok else 1)
