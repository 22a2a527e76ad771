"""Reference values for the audio frontend tests.

Independent numpy/scipy implementation of the band-pass filter and the
MFCC pipeline (pre-emphasis 0.97, symmetric Hann, 512-point FFT, HTK mel
filterbank over 20-4000 Hz, natural log with 1e-10 floor, orthonormal
DCT-II). Output is pasted into tests/core/frontend_test.cpp.
"""
import numpy as np
from scipy import signal, fft

SR = 16000
N = 16000


def band_pass(x):
    hp = signal.butter(4, 20, "highpass", fs=SR, output="sos")
    lp = signal.butter(4, 4000, "lowpass", fs=SR, output="sos")
    return signal.sosfilt(lp, signal.sosfilt(hp, x))


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def filterbank():
    edges = mel_to_hz(np.linspace(hz_to_mel(20.0), hz_to_mel(4000.0), 42))
    freqs = np.arange(257) * SR / 512.0
    fb = np.zeros((40, 257))
    for j in range(40):
        lo, c, hi = edges[j], edges[j + 1], edges[j + 2]
        up = (freqs - lo) / (c - lo)
        down = (hi - freqs) / (hi - c)
        fb[j] = np.maximum(0.0, np.minimum(up, down))
    return edges[1:41], fb


def log_mel(x):
    y = np.append(x[0], x[1:] - 0.97 * x[:-1])
    n = np.arange(480)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * n / 479)
    _, fb = filterbank()
    frames = []
    for t in range((len(y) - 480) // 160 + 1):
        seg = y[t * 160 : t * 160 + 480] * win
        # direct DFT, not an FFT, to stay independent of the implementation
        k = np.arange(257)[:, None]
        basis = np.exp(-2j * np.pi * k * n[None, :] / 512)
        power = np.abs(basis @ seg) ** 2
        frames.append(np.log(np.maximum(fb @ power, 1e-10)))
    return np.array(frames)


def mfcc(x):
    return fft.dct(log_mel(x), type=2, norm="ortho", axis=1)


t = np.arange(N) / SR
print("== band-pass rms ratios (input rms -> output rms / input rms)")
for name, x, tail in [
    ("cos8k", np.cos(np.pi * np.arange(N)), False),
    ("sin6k", np.sin(2 * np.pi * 6000 * t), False),
    ("sin1k", np.sin(2 * np.pi * 1000 * t), False),
    ("sin300", np.sin(2 * np.pi * 300 * t), False),
    ("sin10_tail", np.sin(2 * np.pi * 10 * t), True),
]:
    y = band_pass(x)
    if tail:
        print(name, rms(y[N // 2 :]) / rms(x[N // 2 :]))
    else:
        print(name, rms(y) / rms(x))

centers, _ = filterbank()
print("== filter centers", centers[:3], centers[-1])
print("nearest to 1k:", int(np.argmin(np.abs(centers - 1000.0))), centers[np.argmin(np.abs(centers - 1000.0))])

lm = log_mel(0.5 * np.sin(2 * np.pi * 1000 * t))
print("1k peak filter per frame (unique):", np.unique(np.argmax(lm, axis=1)))

zero = log_mel(np.zeros(N))
print("zero log-mel row", zero[0][:3])
print("zero mfcc row0", fft.dct(zero, type=2, norm="ortho", axis=1)[0][:3])

chirp = 0.3 * np.sin(2 * np.pi * 440 * t) + 0.2 * np.sin(2 * np.pi * (300 + 1000 * t) * t)
m = mfcc(chirp)
lmc = log_mel(chirp)
np.set_printoptions(precision=10)
for row in (0, 50, 97):
    print("chirp mfcc", row, repr(m[row][:6]))
    print("chirp logmel", row, repr(lmc[row][[0, 10, 20, 39]]))
