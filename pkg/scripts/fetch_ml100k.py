"""Fetch MovieLens-100K ``u.data`` into ``data/ml-100k/``.

Tries the GroupLens archive first. Where that host is unreachable, falls back
to the copy of the full rating file bundled in the RecBole wheel on PyPI
(``ml-100k.inter``: identical rows, one header line) and rewrites it in the
original tab-separated ``user item rating timestamp`` layout.
"""
import argparse
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
RECBOLE_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_grouplens(timeout=20):
    with urllib.request.urlopen(GROUPLENS_URL, timeout=timeout) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        return zf.read("ml-100k/u.data").decode()


def from_recbole_wheel():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "recbole==1.2.1", "-d", tmp],
            check=True,
        )
        wheel = next(f for f in os.listdir(tmp) if f.endswith(".whl"))
        with zipfile.ZipFile(os.path.join(tmp, wheel)) as zf:
            text = zf.read(RECBOLE_MEMBER).decode()
    rows = text.splitlines()[1:]
    return "".join(row + "\n" for row in rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join("data", "ml-100k", "u.data"))
    args = parser.parse_args()
    try:
        text = from_grouplens()
        source = "grouplens"
    except OSError:
        text = from_recbole_wheel()
        source = "recbole wheel"
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write(text)
    print(f"wrote {len(text.splitlines())} ratings to {args.out} ({source})")


if __name__ == "__main__":
    main()
