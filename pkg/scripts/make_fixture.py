#!/usr/bin/env python3
"""Generate a synthetic outline corpus with matching embeddings and gazetteer.

The corpus imitates encyclopedia articles whose same-named sections
share topical vocabulary, which is exactly the structure the retrieval
methods exploit. Writes corpus.jsonl, embeddings.txt, and
gazetteer.tsv into --out-dir; identical flags always reproduce
identical bytes.
"""

import argparse
import sys

from headingrank.synth import SynthSpec, write_fixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--pages", type=int, default=200)
    ap.add_argument("--concepts", type=int, default=24,
                    help="size of the shared heading pool")
    ap.add_argument("--min-sections", type=int, default=8)
    ap.add_argument("--max-sections", type=int, default=12)
    ap.add_argument("--embedding-dim", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    spec = SynthSpec(pages=args.pages, concepts=args.concepts,
                     sections_per_page=(args.min_sections, args.max_sections),
                     embedding_dim=args.embedding_dim, seed=args.seed)
    paths = write_fixture(spec, args.out_dir)
    for kind, path in sorted(paths.items()):
        print(f"{kind}\t{path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
