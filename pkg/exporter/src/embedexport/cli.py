import argparse
import logging
import sys

from .exporter import EncoderLoadError, ExportJob, export_embeddings


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="tar-embed-export",
        description="Compute transformer sentence embeddings for a corpus and "
                    "topic file and write them in the EMB1 format.",
    )
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--topics", required=True)
    parser.add_argument("--model", required=True,
                        help="sentence-transformers model id or local path")
    parser.add_argument("--out", required=True)
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=32)
    args = parser.parse_args(argv)

    job = ExportJob(args.corpus, args.topics, args.model, args.out,
                    args.max_tokens, args.batch_size)
    try:
        summary = export_embeddings(job)
    except EncoderLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"dim={summary['dim']} queries={summary['queries']} sentences={summary['sentences']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
