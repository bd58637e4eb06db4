import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    sys.stdout.write(json.dumps({"id": req["id"], "error": "input out of range"}) + "\n")
    sys.stdout.flush()
