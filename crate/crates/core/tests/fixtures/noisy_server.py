# Returns a different value on every call.
import json
import random
import sys

for line in sys.stdin:
    req = json.loads(line)
    if "X" in req:
        out = {"id": req["id"], "F": [random.random() for _ in req["X"]]}
    else:
        out = {"id": req["id"], "f": random.random()}
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()
