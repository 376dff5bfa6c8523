"""Thin command-line client over the service layer.

`run` and `report` call the same handlers the HTTP service exposes; with
--server they go over HTTP instead, producing the same artifacts either way.
Exit codes: 0 success, 2 config error, 3 invariant violation, 4 acceptance
failure (report mode).
"""

import argparse
import json
import sys

from .experiments import (EXIT_CONFIG, ConfigError, load_config)


def _run_local(args) -> int:
    from .service import RunRequest, execute_run

    try:
        config = load_config(args.config)
        req = RunRequest(config=config, out_dir=args.output, seed=args.seed,
                         threads=args.threads)
        if args.resume:
            req.config = req.config.model_copy(
                update={"checkpoint_every": req.config.checkpoint_every or 50000})
        res = execute_run(req)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(res.summary, sort_keys=True))
    print(f"results: {res.results_csv}")
    return res.exit_code


def _run_remote(args) -> int:
    import httpx

    with open(args.config) as f:
        text = f.read()
    body = {"config_text": text, "out_dir": args.output,
            "seed": args.seed, "threads": args.threads}
    r = httpx.post(f"{args.server}/experiments/run", json=body, timeout=None)
    if r.status_code == 422:
        print(f"config error: {r.json()['detail']}", file=sys.stderr)
        return EXIT_CONFIG
    r.raise_for_status()
    res = r.json()
    print(json.dumps(res["summary"], sort_keys=True))
    print(f"results: {res['results_csv']}")
    return res["exit_code"]


def _report(args) -> int:
    if args.server:
        import httpx

        r = httpx.post(f"{args.server}/experiments/report",
                       json={"out_dir": args.output_dir}, timeout=None)
        r.raise_for_status()
        res = r.json()
    else:
        from .service import ReportRequest, execute_report

        res = execute_report(ReportRequest(out_dir=args.output_dir)).model_dump()
    for line in res["lines"]:
        print(line)
    return res["exit_code"]


def _serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tiltedlines",
        description="experiment runner for area-tilted line ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="seed override")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--resume", action="store_true",
                       help="resume from checkpoints in the output directory")
    p_run.add_argument("--server", default=None,
                       help="run via a remote service URL instead of in-process")

    p_rep = sub.add_parser("report", help="summarize a finished experiment")
    p_rep.add_argument("output_dir")
    p_rep.add_argument("--server", default=None)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8321)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _run_remote(args) if args.server else _run_local(args)
    if args.command == "report":
        return _report(args)
    if args.command == "serve":
        return _serve(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
