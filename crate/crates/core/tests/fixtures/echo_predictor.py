#!/usr/bin/env python3
"""Test predictor speaking the midlime NDJSON protocol.

mid = mean of the spectrogram replicated 7 times; emotion = W @ mid + b.

Flags (fault injection):
  --reverse        answer every group of queued requests in reverse order
  --six-mids       advertise only six mid-level names
  --garbage        answer the handshake with a non-JSON line
  --protocol N     advertise protocol version N
  --no-head        advertise linear_head = null
  --nan-at K       emit NaN for global item index K
  --die-after N    exit(3) after answering N predict requests
  --bad-id         answer the first request with an unknown id
  --silent         never answer the handshake
  --bins B         advertise input_spec.bins = B (default null: any)
"""
import json
import os
import select
import sys

args = sys.argv[1:]


def flag(name):
    return name in args


def value(name, default=None):
    if name in args:
        return args[args.index(name) + 1]
    return default


W = [[(i + 1) * 0.1 - j * 0.05 for j in range(7)] for i in range(8)]
B = [0.01 * i for i in range(8)]

fd = sys.stdin.fileno()
buf = b""


def read_line(timeout=None):
    """Read one line from stdin without Python-level buffering."""
    global buf
    while b"\n" not in buf:
        if timeout is not None:
            ready, _, _ = select.select([fd], [], [], timeout)
            if not ready:
                return None
        chunk = os.read(fd, 1 << 20)
        if not chunk:
            return ""
        buf += chunk
    line, buf = buf.split(b"\n", 1)
    return line.decode()


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


hello = json.loads(read_line())
assert hello == {"type": "handshake", "protocol": 1}, hello
print("handshake received", file=sys.stderr, flush=True)
if flag("--silent"):
    read_line()
    sys.exit(0)
if flag("--garbage"):
    sys.stdout.write("this is not json\n")
    sys.stdout.flush()
    sys.exit(0)

mids = ["m%d" % i for i in range(6 if flag("--six-mids") else 7)]
caps = {
    "type": "capabilities",
    "mid_names": mids,
    "emotion_names": ["e%d" % i for i in range(8)],
    "linear_head": None if flag("--no-head") else {"weights": W, "bias": B},
    "input_spec": {
        "bins": int(value("--bins")) if value("--bins") is not None else None,
        "frames": "variable",
    },
}
if value("--protocol") is not None:
    caps["protocol"] = int(value("--protocol"))
send(caps)

nan_at = int(value("--nan-at", -1))
die_after = int(value("--die-after", -1))
answered = 0
seen_items = 0


def answer(req):
    global answered, seen_items
    mid, emo = [], []
    for flat in req["batch"]:
        m = sum(flat) / len(flat)
        row = [m] * 7
        if seen_items == nan_at:
            row[2] = float("nan")
        seen_items += 1
        mid.append(row)
        emo.append([sum(W[i][j] * row[j] for j in range(7)) + B[i] for i in range(8)])
    rid = req["id"]
    if flag("--bad-id") and answered == 0:
        rid = 10 ** 9
    send({"type": "prediction", "id": rid, "mid": mid, "emotion": emo})
    answered += 1
    if die_after >= 0 and answered >= die_after:
        sys.exit(3)


while True:
    line = read_line()
    if line == "":
        sys.exit(0)
    msg = json.loads(line)
    if msg["type"] == "shutdown":
        sys.exit(0)
    queue = [msg]
    if flag("--reverse"):
        while True:
            more = read_line(timeout=0.05)
            if more is None or more == "":
                break
            nxt = json.loads(more)
            if nxt["type"] == "shutdown":
                for r in reversed(queue):
                    answer(r)
                sys.exit(0)
            queue.append(nxt)
    for r in reversed(queue):
        answer(r)
