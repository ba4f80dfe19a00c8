#!/usr/bin/env python3
"""Regenerates include/bailcnn/unicode_data.hpp from Python's unicodedata.

The tables cover what the tokenizer needs: whitespace and punctuation
classification, control/format characters, combining marks, canonical
combining classes, canonical (de)compositions for NFC/NFD, and simple
lowercase mappings. Run with any CPython >= 3.8 and commit the result.
"""

import sys
import unicodedata

MAX_CP = 0x110000


def ranges_from(predicate):
    out = []
    start = None
    for cp in range(MAX_CP):
        if predicate(cp):
            if start is None:
                start = cp
        else:
            if start is not None:
                out.append((start, cp - 1))
                start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def category(cp):
    return unicodedata.category(chr(cp))


def main(out_path):
    # Whitespace: the ASCII controls commonly treated as spacing plus Zs/Zl/Zp.
    ws = {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x1C, 0x1D, 0x1E, 0x1F, 0x85}
    for cp in range(MAX_CP):
        if category(cp) in ("Zs", "Zl", "Zp"):
            ws.add(cp)
    ws = sorted(ws)

    punct = ranges_from(lambda cp: category(cp).startswith("P"))
    control = ranges_from(
        lambda cp: category(cp) in ("Cc", "Cf") and cp not in (0x09, 0x0A, 0x0D)
    )
    mark_mn = ranges_from(lambda cp: category(cp) == "Mn")

    ccc = []
    start = None
    prev_cls = 0
    for cp in range(MAX_CP):
        cls = unicodedata.combining(chr(cp))
        if cls != prev_cls:
            if prev_cls != 0:
                ccc.append((start, cp - 1, prev_cls))
            start = cp
            prev_cls = cls
    if prev_cls != 0:
        ccc.append((start, MAX_CP - 1, prev_cls))

    # Canonical decompositions only (no <compat> tags). Hangul is algorithmic
    # and intentionally absent from UnicodeData's decomposition field.
    decomp = []
    for cp in range(MAX_CP):
        d = unicodedata.decomposition(chr(cp))
        if not d or d.startswith("<"):
            continue
        parts = [int(p, 16) for p in d.split()]
        assert 1 <= len(parts) <= 2, hex(cp)
        first = parts[0]
        second = parts[1] if len(parts) == 2 else 0
        decomp.append((cp, first, second))

    # Primary composites: pairs that NFC actually recombines (this bakes in
    # the composition exclusions).
    compose = []
    for cp, first, second in decomp:
        if second == 0:
            continue
        if unicodedata.normalize("NFC", chr(first) + chr(second)) == chr(cp):
            compose.append((first, second, cp))
    compose.sort()

    lower = []
    for cp in range(MAX_CP):
        lo = chr(cp).lower()
        if lo != chr(cp):
            cps = [ord(c) for c in lo]
            assert len(cps) <= 3, hex(cp)
            while len(cps) < 3:
                cps.append(0)
            lower.append((cp, cps[0], cps[1], cps[2]))

    with open(out_path, "w", encoding="utf-8") as f:
        w = f.write
        w("// Generated by scripts/gen_unicode_data.py — do not edit by hand.\n")
        w(f"// Unicode version: {unicodedata.unidata_version}\n")
        w("#pragma once\n\n")
        w("#include <cstddef>\n#include <cstdint>\n\n")
        w("namespace bailcnn::unicode_data {\n\n")
        w("struct CpRange { uint32_t lo, hi; };\n")
        w("struct CccRange { uint32_t lo, hi; uint8_t ccc; };\n")
        w("struct Decomp { uint32_t cp, first, second; };\n")
        w("struct Compose { uint32_t first, second, composed; };\n")
        w("struct Lower { uint32_t cp, l0, l1, l2; };\n\n")

        def emit_list(name, typ, rows, fmt):
            w(f"inline constexpr {typ} {name}[] = {{\n")
            line = "  "
            for row in rows:
                item = fmt(row) + ", "
                if len(line) + len(item) > 98:
                    w(line.rstrip() + "\n")
                    line = "  "
                line += item
            if line.strip():
                w(line.rstrip() + "\n")
            w("};\n")
            w(f"inline constexpr size_t {name}_count = sizeof({name}) / sizeof({name}[0]);\n\n")

        emit_list("kWhitespace", "uint32_t", ws, lambda r: f"0x{r:04X}")
        emit_list("kPunctuation", "CpRange", punct, lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}}}")
        emit_list("kControl", "CpRange", control, lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}}}")
        emit_list("kMarkNonspacing", "CpRange", mark_mn, lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}}}")
        emit_list("kCombiningClass", "CccRange", ccc,
                  lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}, {r[2]}}}")
        emit_list("kDecompositions", "Decomp", decomp,
                  lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}, 0x{r[2]:04X}}}")
        emit_list("kCompositions", "Compose", compose,
                  lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}, 0x{r[2]:04X}}}")
        emit_list("kLowercase", "Lower", lower,
                  lambda r: f"{{0x{r[0]:04X}, 0x{r[1]:04X}, 0x{r[2]:04X}, 0x{r[3]:04X}}}")

        w("}  // namespace bailcnn::unicode_data\n")

    print(f"wrote {out_path}: ws={len(ws)} punct={len(punct)} ctrl={len(control)} "
          f"mn={len(mark_mn)} ccc={len(ccc)} decomp={len(decomp)} "
          f"compose={len(compose)} lower={len(lower)}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "include/bailcnn/unicode_data.hpp")
