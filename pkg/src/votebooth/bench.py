"""Timing comparison of the curve arithmetic kernels.

The curve profile runs on the compiled extension when it built and on
the pure-Python fallback otherwise. This measures both on the same
machine so the difference is a number instead of folklore: medians
over a few repeats, reported per operation. Not a throughput claim;
the only question is whether the extension pays for itself.
"""

import random
import statistics
import time

from votebooth import elgamal
from votebooth.groups import CurveGroup


def available_kernels():
    """Kernel modules in preference order, compiled first when built."""
    from votebooth import _secp_pure
    kernels = []
    try:
        from votebooth import _secp_native  # type: ignore[attr-defined]
        kernels.append(_secp_native)
    except ImportError:
        pass
    kernels.append(_secp_pure)
    return kernels


def _median_us(fn, ops, repeat):
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples) / ops * 1e6


def measure(iterations=64, repeat=3, seed=1):
    """One row per kernel: microseconds per fixed-base scalar
    multiplication and per full encryption, over `iterations` ops."""
    rows = []
    for kernel in available_kernels():
        group = CurveGroup(kernel)
        rng = random.Random(seed)
        scalars = [group.random_scalar(rng, nonzero=True)
                   for _ in range(iterations)]
        messages = [group.exp(group.g1, k) for k in scalars]
        joint = group.exp(group.g1, group.random_scalar(rng, nonzero=True))

        def mul():
            for k in scalars:
                group.exp(group.g1, k)

        def enc():
            enc_rng = random.Random(seed + 1)
            for m in messages:
                elgamal.encrypt(group, joint, m, enc_rng)

        rows.append({
            "backend": kernel.NAME,
            "scalar_mul_us": _median_us(mul, iterations, repeat),
            "encrypt_us": _median_us(enc, iterations, repeat),
        })
    return rows


def render(rows):
    lines = [
        "%-12s scalar-mul %9.1f us/op   encrypt %9.1f us/op"
        % (row["backend"], row["scalar_mul_us"], row["encrypt_us"])
        for row in rows
    ]
    by_name = {row["backend"]: row for row in rows}
    if "native" in by_name and "pure-python" in by_name:
        native, pure = by_name["native"], by_name["pure-python"]
        lines.append("native speedup: %.1fx scalar-mul, %.1fx encrypt"
                     % (pure["scalar_mul_us"] / native["scalar_mul_us"],
                        pure["encrypt_us"] / native["encrypt_us"]))
    return "\n".join(lines) + "\n"
