import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    sys.stdout.write('{"id": %d, "f": NaN}\n' % req["id"])
    sys.stdout.flush()
