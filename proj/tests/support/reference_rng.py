#!/usr/bin/env python3
"""Independent reference implementation of the library's seeded generators.

Reimplements splitmix64, xoshiro256++, the Box-Muller normal stream, and the
observation simulator in pure Python, and prints golden values that the C++
tests freeze. Run from the repository root:

    python3 tests/support/reference_rng.py
"""

MASK = (1 << 64) - 1


def mix64(z):
    z = (z + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro256pp:
    def __init__(self, seed):
        sm = SplitMix64(seed)
        self.s = [sm.next() for _ in range(4)]
        if not any(self.s):
            self.s[0] = 1

    def next(self):
        s = self.s
        result = (rotl((s[0] + s[3]) & MASK, 23) + s[0]) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result


class GaussianStream:
    def __init__(self, seed):
        self.eng = Xoshiro256pp(seed)
        self.cached = None

    def next(self):
        import math
        if self.cached is not None:
            z, self.cached = self.cached, None
            return z
        u1 = ((self.eng.next() >> 11) + 1) * 2.0 ** -53
        u2 = (self.eng.next() >> 11) * 2.0 ** -53
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self.cached = radius * math.sin(angle)
        return radius * math.cos(angle)


def simulate_observation(theta, n, p, seed):
    gauss = GaussianStream(seed)
    noise_scale = n ** -0.5
    xs = []
    for i, th in enumerate(theta, start=1):
        kappa = float(i) ** -p
        xs.append(kappa * th + noise_scale * gauss.next())
    return xs


def main():
    eng = Xoshiro256pp(1)
    print("xoshiro256++ seed=1 first 5 outputs:")
    for _ in range(5):
        print(f"  {eng.next()}")

    gauss = GaussianStream(42)
    print("box-muller seed=42 first 6 normals:")
    for _ in range(6):
        print(f"  {gauss.next():.17g}")

    xs = simulate_observation([1.0, 1.0, 1.0], n=100, p=1.0, seed=42)
    print("observation n=100 p=1 D=3 theta=(1,1,1) seed=42:")
    for x in xs:
        print(f"  {x:.17g}")


if __name__ == "__main__":
    main()
