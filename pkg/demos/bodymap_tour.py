# Walk the body-map registry: what the codes are, how lookups work, and
# what the one-hot encoding that feeds the location branch looks like.

import numpy as np

from woundfuse.bodymap import decode_location, default_registry, encode_location

registry = default_registry()


def main():
    codes = registry.codes
    print(f"registry holds {len(codes)} region codes ({codes[0]}..{codes[-1]})")

    named = [c for c in codes if not registry.region(c).name.startswith("Body Region")]
    print(f"\n{len(named)} regions carry anatomical names:")
    for code in named:
        region = registry.region(code)
        print(f"  {region.code:>3}  {region.name:<38} side={region.side:<5} view={region.view}")

    # name -> code works too
    code = registry.lookup_code("Left Anterior Ankle")
    print(f"\nlookup_code('Left Anterior Ankle') -> {code}")

    # the location branch consumes a one-hot vector over the whole registry
    onehot = encode_location(135, registry)
    print(f"\nencode_location(135) -> shape {onehot.shape}, dtype {onehot.dtype}, "
          f"sum {onehot.sum():.0f}, hot index {int(np.argmax(onehot))}")

    # and every code round-trips through decode
    assert all(decode_location(encode_location(c, registry), registry) == c for c in codes)
    print(f"encode/decode round trip holds for all {len(codes)} codes")

    # membership test is just `in`
    print(f"\n135 in registry: {135 in registry}")
    print(f"999 in registry: {999 in registry}")


if __name__ == "__main__":
    main()
