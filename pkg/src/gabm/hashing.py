"""64-bit FNV-1a, used for echo placeholders, embeddings and transcript digests."""

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK
    return h


def fnv1a64_hex(data: bytes | str) -> str:
    return format(fnv1a64(data), "016x")
