#!/usr/bin/env python3
"""Wideband PESQ for `dscodec eval --pesq-cmd`: prints one score for REF DEG."""
import sys
import wave

import numpy as np
from pesq import pesq


def load(path):
    with wave.open(path) as w:
        if w.getsampwidth() != 2 or w.getnchannels() != 1:
            sys.exit(f"{path}: expected mono PCM16")
        rate = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2").astype(np.float64) / 32768.0
    return rate, data


def main():
    if len(sys.argv) != 3:
        sys.exit("usage: pesq_adapter.py REF.wav DEG.wav")
    rate, ref = load(sys.argv[1])
    _, deg = load(sys.argv[2])
    print(pesq(rate, ref, deg, "wb"))


if __name__ == "__main__":
    main()
