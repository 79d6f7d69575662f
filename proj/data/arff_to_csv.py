#!/usr/bin/env python3
"""Convert the UCI chronic_kidney_disease_full.arff into the comma-delimited
CSV dialect read by nephro_xai.

Cell contents are copied verbatim ('?' markers, stray tabs and spaces are kept)
so the ingestion layer sees the file as published. The only edits are to three
ragged rows that carry one surplus empty field in the source file.
"""
import sys

HEADER = ("age,bp,sg,al,su,rbc,pc,pcc,ba,bgr,bu,sc,sod,pot,hemo,pcv,wbcc,rbcc,"
          "htn,dm,cad,appet,pe,ane,class")


def main(src, dst):
    lines = open(src, encoding="utf-8").read().split("\n")
    start = next(i for i, l in enumerate(lines) if l.strip().lower() == "@data")
    out = [HEADER]
    for line in lines[start + 1:]:
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) == 26:
            # surplus empty field: trailing comma or a doubled separator
            empty = [i for i, f in enumerate(fields) if f == ""]
            del fields[empty[-1]]
        assert len(fields) == 25, line
        out.append(",".join(fields))
    with open(dst, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
