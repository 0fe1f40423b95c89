"""Run the service: python -m modelservice [--port N] [--mode stub|real]."""

import argparse

import uvicorn

from .app import ServiceConfig, create_app


def main() -> None:
    parser = argparse.ArgumentParser(prog="modelservice")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8081)
    parser.add_argument("--mode", choices=("stub", "real"), default="stub")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    config = ServiceConfig(mode=args.mode, port=args.port, seed=args.seed)
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
