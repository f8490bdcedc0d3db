#!/usr/bin/env python3
"""Scripted classifier backend for protocol tests.

usage: fake_classifier.py MODE [TRANSCRIPT]
Label of an image is the index of its largest value, modulo the class count (3).
"""
import json
import sys
import time

import signal

signal.signal(signal.SIGPIPE, signal.SIG_DFL)
mode = sys.argv[1]
log = open(sys.argv[2], "w") if len(sys.argv) > 2 else None

for line in sys.stdin:
    if log:
        log.write(line)
        log.flush()
    req = json.loads(line)
    labels = [max(range(len(img)), key=lambda i: (img[i], -i)) % 3 for img in req["images"]]
    resp = {"id": req["id"], "labels": labels}
    if mode == "scores":
        resp["scores"] = [[float(l == c) for c in range(3)] for l in labels]
    elif mode == "badjson":
        sys.stdout.write("this is not json\n")
        sys.stdout.flush()
        continue
    elif mode == "wrongid":
        resp["id"] = req["id"] + 7
    elif mode == "badlabel":
        resp["labels"] = [5 for _ in labels]
    elif mode == "short":
        resp["labels"] = labels[:-1]
    elif mode == "sleep":
        time.sleep(5)
    elif mode == "exit":
        sys.exit(3)
    out = json.dumps(resp, separators=(",", ":"))
    if log:
        log.write(out + "\n")
        log.flush()
    sys.stdout.write(out + "\n")
    sys.stdout.flush()
