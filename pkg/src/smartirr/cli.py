"""Single entrypoint: every subsystem is a subcommand of ``smartirr``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import time
from pathlib import Path

from . import __version__
from .bus import BrokerServer, BusClient, DEFAULT_PORT
from .controller import Controller, replay_trials
from .dataprep import ParseError, clean_dataset, dataset_from_csv, parse_payload
from .evaluation import cross_validate, format_report
from .fieldsim import SimConfig, Simulator, generate_training_set, load_sim_config
from .gateway import Gateway, GatewayServer
from .store import TelemetryStore
from .tree import (
    ModelFormatError,
    build_tree,
    load_model,
    predict,
    render_tree,
    save_model,
    tree_size,
)

log = logging.getLogger(__name__)

STORE_ENV = "SMARTIRR_STORE"


class CliError(Exception):
    pass


def _store_dir(value: str | None) -> Path:
    path = value or os.environ.get(STORE_ENV)
    if not path:
        raise CliError(f"no store directory: pass --store or set {STORE_ENV}")
    return Path(path)


def _split_host_port(value: str, default_port: int) -> tuple[str, int]:
    host, _, port = value.partition(":")
    return host or "127.0.0.1", int(port) if port else default_port


def _wait_for_signal() -> None:
    stop = []
    signal.signal(signal.SIGTERM, lambda *_: stop.append(1))
    try:
        while not stop:
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass


def _load_training_csv(path: str, clean: str, knn_k: int):
    text = Path(path).read_text()
    d = dataset_from_csv(text)
    return clean_dataset(d, clean, knn_k)


# -- subcommands -----------------------------------------------------------------


def cmd_broker(args) -> int:
    server = BrokerServer(host=args.host, port=args.port)
    server.start()
    print(f"broker listening on {args.host}:{server.port}")
    _wait_for_signal()
    server.stop()
    return 0


def cmd_sim(args) -> int:
    config = load_sim_config(args.config) if args.config else SimConfig(seed=args.seed)
    host, port = _split_host_port(args.broker, DEFAULT_PORT)
    client = BusClient(host, port, client_id=f"sim-{args.node_id}")
    sim = Simulator(config, node_id=args.node_id, seed=args.seed, epoch_ms=int(time.time() * 1000))
    sim.attach(client)
    pacing = config.tick / args.speed if args.speed > 0 else 0.0
    print(f"simulating node {args.node_id}: tick {config.tick:g} s, speed x{args.speed:g}")
    published = 0
    try:
        while args.ticks == 0 or sim.state.tick_index < args.ticks:
            if sim.tick() is not None:
                published += 1
            if pacing:
                time.sleep(pacing)
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    print(f"published {published} readings")
    return 0


def cmd_train(args) -> int:
    if args.simulate:
        dataset = generate_training_set(SimConfig(seed=args.seed), args.simulate, seed=args.seed)
    elif args.data:
        dataset = _load_training_csv(args.data, args.clean, args.knn_k)
    else:
        raise CliError("pass --data CSV or --simulate N")
    model = build_tree(dataset, min_leaf=args.min_leaf, confidence=args.confidence, norm_method=args.norm)
    save_model(model, args.out)
    correct = sum(1 for inst in dataset.instances if predict(model, inst)[0] == inst.label)
    print(f"trained on {len(dataset)} instances; nodes {tree_size(model.root)}; "
          f"training accuracy {correct / len(dataset):.4f}")
    print(render_tree(model))
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = _load_training_csv(args.data, args.clean, args.knn_k)
    report = cross_validate(
        dataset, k=args.k, seed=args.seed, min_leaf=args.min_leaf, confidence=args.confidence, norm_method=args.norm
    )
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(format_report(report), end="")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    inst = parse_payload(args.data)
    value, probs = predict(model, inst)
    if args.probabilities:
        print(f"{value} p0={probs[0]:.4f} p1={probs[1]:.4f}")
    else:
        print(value)
    return 0


def cmd_controller(args) -> int:
    model = load_model(args.model)
    store = TelemetryStore(_store_dir(args.store))
    host, port = _split_host_port(args.broker, DEFAULT_PORT)
    client = BusClient(host, port, client_id="controller")
    controller = Controller(model, store=store)
    controller.attach(client)
    print(f"controller online (model {args.model}); publishing decisions")
    _wait_for_signal()
    client.close()
    store.close()
    return 0


def cmd_gateway(args) -> int:
    store = TelemetryStore(_store_dir(args.store))
    controller = None
    client = None
    if args.model:
        controller = Controller(load_model(args.model), store=store)
        if args.broker:
            host, port = _split_host_port(args.broker, DEFAULT_PORT)
            client = BusClient(host, port, client_id="gateway-controller")
            controller.attach(client)
    gateway = Gateway(store, controller, static_dir=args.static)
    server = GatewayServer(gateway, host=args.host, port=args.port)
    server.start()
    role = "with embedded controller" if controller else "read-only (no model)"
    print(f"gateway on http://{args.host}:{server.port} {role}")
    _wait_for_signal()
    server.stop()
    if client is not None:
        client.close()
    store.close()
    return 0


def cmd_export(args) -> int:
    store = TelemetryStore(_store_dir(args.store))
    try:
        result = store.export_training_csv(args.start, args.end, args.label_source)
    finally:
        store.close()
    if args.out:
        Path(args.out).write_text(result.csv)
        print(f"wrote {result.rows} rows to {args.out} ({result.skipped} skipped)")
    else:
        sys.stdout.write(result.csv)
        if result.skipped:
            print(f"skipped {result.skipped} rows without a decision in the join window", file=sys.stderr)
    return 0


def cmd_replay_table1(args) -> int:
    model = load_model(args.model)
    rows = replay_trials(model)
    print(f"{'DATA':<22}{'PREDICTED':<11}{'ACTUAL':<8}RESULT")
    hits = 0
    for payload, predicted, actual in rows:
        ok = predicted == actual
        hits += ok
        print(f"{payload:<22}{predicted:<11}{actual:<8}{'TRUE' if ok else 'FALSE'}")
    print(f"success {hits}/{len(rows)} ({100.0 * hits / len(rows):.1f}%)")
    return 0 if hits == len(rows) else 1


# -- argument wiring ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smartirr", description="software-simulated smart irrigation platform")
    parser.add_argument("--version", action="version", version=f"smartirr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("broker", help="serve the MQTT-subset bus")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.set_defaults(func=cmd_broker)

    p = sub.add_parser("sim", help="run the field simulator against a broker")
    p.add_argument("--broker", default="127.0.0.1", help="host[:port]")
    p.add_argument("--node-id", default="n1")
    p.add_argument("--config", help="simulator config JSON")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--ticks", type=int, default=0, help="stop after N ticks (0 = run until interrupted)")
    p.add_argument("--speed", type=float, default=60.0, help="sim-seconds per wall-second multiplier (0 = flat out)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("train", help="train a decision model from CSV (or simulated data)")
    p.add_argument("--data", help="training CSV (humidity,temperature,soil_moisture,is_raining,label)")
    p.add_argument("--simulate", type=int, default=0, metavar="N", help="generate N oracle-labeled instances instead")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--confidence", type=float, default=0.25)
    p.add_argument("--norm", choices=["zscore", "minmax"], default="zscore")
    p.add_argument("--clean", choices=["drop", "knn"], default="drop")
    p.add_argument("--knn-k", type=int, default=3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="stratified cross-validation report")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--confidence", type=float, default=0.25)
    p.add_argument("--norm", choices=["zscore", "minmax"], default="zscore")
    p.add_argument("--clean", choices=["drop", "knn"], default="drop")
    p.add_argument("--knn-k", type=int, default=3)
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="one-shot prediction for a payload string")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help='payload, e.g. "35,11,748,0"')
    p.add_argument("--probabilities", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("controller", help="run the decision loop against a broker")
    p.add_argument("--broker", default="127.0.0.1")
    p.add_argument("--model", required=True)
    p.add_argument("--store", help=f"store directory (or ${STORE_ENV})")
    p.set_defaults(func=cmd_controller)

    p = sub.add_parser("gateway", help="serve the operator HTTP/WebSocket API")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--store", help=f"store directory (or ${STORE_ENV})")
    p.add_argument("--model", help="model file; enables the embedded controller")
    p.add_argument("--broker", help="host[:port] to consume telemetry from")
    p.add_argument("--static", help="directory of dashboard static files")
    p.set_defaults(func=cmd_gateway)

    p = sub.add_parser("export", help="export stored readings as a training CSV")
    p.add_argument("--store", help=f"store directory (or ${STORE_ENV})")
    p.add_argument("--from", dest="start", type=int, default=0, help="unix ms, inclusive")
    p.add_argument("--to", dest="end", type=int, default=2**62, help="unix ms, exclusive")
    p.add_argument("--label-source", choices=["oracle", "decisions"], default="oracle")
    p.add_argument("--out", help="file to write (default stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay-table1", help="replay the 30 recorded trials against a model")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_replay_table1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (CliError, ModelFormatError, ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
