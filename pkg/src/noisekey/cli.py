"""Command-line front end.

Every CSV written here starts with one ``#`` line echoing the tool version
and all parameters, followed by a header row. Read with
``pandas.read_csv(path, comment="#")`` or skip the first line.

Exit status: 0 on success, 1 on accuracy/runtime failure, 2 on invalid
configuration, 3 when the one-time-pad key store refuses an operation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__, attack, channel, protocol, quantum
from .params import Encoding, ProtocolParams
from .phrg import EntropySource, NoiseKind, NoiseModel, emit_indices, fresh_bits

SEED_ENV = "NOISEKEY_SEED"
EXIT_ACCURACY, EXIT_CONFIG, EXIT_REFUSED = 1, 2, 3


class ConfigError(ValueError):
    pass


class KeyStoreRefusal(RuntimeError):
    pass


# -- helpers ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


class _CsvOut:
    def __init__(self, path, command, echo: dict):
        self._fh = open(path, "w", newline="") if path and path != "-" else None
        stream = self._fh or sys.stdout
        params = " ".join(f"{k}={v}" for k, v in echo.items())
        stream.write(f"# noisekey {__version__} {command} {params}\n")
        self.writer = csv.writer(stream, lineterminator="\n")

    def row(self, *values):
        self.writer.writerow([_fmt(v) for v in values])

    def close(self):
        if self._fh:
            self._fh.close()


def _seed(args):
    env = os.environ.get(SEED_ENV)
    if env is not None and env != "":
        return int(env)
    return args.seed


def _sources(seed, count):
    if seed is None:
        return [EntropySource.os() for _ in range(count)]
    states = np.random.SeedSequence(seed).generate_state(count)
    return [EntropySource.seeded(int(s)) for s in states]


def _params(args) -> ProtocolParams:
    enc = Encoding.SECTOR_M2 if args.encoding == "sector" else Encoding.UNIFORM_WHEEL
    try:
        p = ProtocolParams(encoding=enc, M=2 if enc is Encoding.SECTOR_M2 else args.M,
                           delta_phi1=args.dphi if enc is Encoding.SECTOR_M2 else None,
                           mean_photons=args.n, L=args.L, q=getattr(args, "q", None))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problems = p.security_warnings()
    if problems:
        for msg in problems:
            print(f"warning: {msg}", file=sys.stderr)
        if not args.force:
            raise ConfigError("insecure configuration (pi/2 > sigma_phi >> delta_phi1 "
                              "violated); pass --force to run anyway")
    return p


def _model(args, p: ProtocolParams) -> NoiseModel:
    if getattr(args, "sigma", None) is not None:
        return NoiseModel.gaussian(sigma=args.sigma)
    return NoiseModel.for_params(p, NoiseKind(args.noise))


def _echo(args, skip=("func", "command", "out", "capture", "truth", "store", "peer_store")):
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _start_sessions(p: ProtocolParams, k0_source: EntropySource):
    k0 = fresh_bits(k0_source, p.L)
    return (protocol.SessionState.start(protocol.Role.INITIATOR, p, k0),
            protocol.SessionState.start(protocol.Role.RESPONDER, p, k0))


def _write_truth(path, bit_arrays):
    with open(path, "w") as fh:
        for bits in bit_arrays:
            fh.write("".join("1" if b else "0" for b in bits) + "\n")


def _read_truth(path):
    rows = Path(path).read_text().split()
    return [np.frombuffer(r.encode(), dtype=np.uint8) - ord("0") for r in rows]


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    p = _params(args)
    model = _model(args, p)
    k0_src, a_src, b_src = _sources(_seed(args), 3)
    alice, bob = _start_sessions(p, k0_src)
    batches, stats = protocol.run_cycles(alice, bob, args.cycles, model, (a_src, b_src))
    out = _CsvOut(args.out, "simulate", _echo(args))
    out.row("cycle", "direction", "L", "errors", "ber", "basis_divergence", "attacker_tap_size")
    for r in stats.rows:
        out.row(r["cycle"], r["direction"], r["L"], r["errors"], r["ber"],
                r["basis_divergence"], r["tap_size"])
    out.close()
    if args.capture:
        channel.write_frames(args.capture, stats.tap.frames())
    if args.truth:
        _write_truth(args.truth, [b.bits for b in batches])
    return 0


def cmd_entropy_scan(args) -> int:
    if args.alpha_min < 0 or args.alpha_max < args.alpha_min or args.points < 1:
        raise ConfigError("need 0 <= alpha-min <= alpha-max and points >= 1")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.points)
    h = quantum.entropy_analytic(alphas)
    out = _CsvOut(args.out, "entropy-scan", _echo(args))
    out.row("alpha", "mean_photons", "H", *(["H_numeric"] if args.numeric else []))
    for a, v in zip(alphas, h):
        extra = [quantum.entropy_numeric(float(a), args.dphi)] if args.numeric else []
        out.row(float(a), float(a * a), float(v), *extra)
    out.close()
    return 0


def _alpha_arg(args):
    if args.alpha is not None:
        return args.alpha
    return math.sqrt(args.n)


def cmd_phase_dist(args) -> int:
    alpha = _alpha_arg(args)
    try:
        pd = quantum.phase_distribution(alpha, delta_phi1=args.dphi, q=args.q)
    except quantum.AccuracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    out = _CsvOut(args.out, "phase-dist", _echo(args))
    out.row("phi_dm", "p", "p_0", "p_dphi", "p_pi", "p_pi_dphi")
    for m in range(pd.q + 1):
        out.row(float(pd.grid[m]), float(pd.values[m]), *(float(c) for c in pd.components[:, m]))
    out.close()
    if abs(pd.total - 1.0) > 1e-9:
        print(f"error: distribution sums to {pd.total!r}", file=sys.stderr)
        return EXIT_ACCURACY
    return 0


def cmd_snr_scan(args) -> int:
    dphis = np.logspace(math.log10(args.dphi_min), math.log10(args.dphi_max), args.points)
    out = _CsvOut(args.out, "snr-scan", _echo(args))
    out.row("delta_phi1", "snr", "mean_photons", "kind")
    status = 0
    for n in args.n:
        alpha = math.sqrt(n)
        for d in dphis:
            try:
                out.row(float(d), quantum.snr_phase(alpha, float(d), args.q), float(n), "curve")
            except quantum.SingularityError:
                out.row(float(d), "nan", float(n), "degenerate")
                status = EXIT_ACCURACY
        try:
            out.row(quantum.snr_crossing(alpha, args.dphi_min, args.dphi_max, args.q),
                    1.0, float(n), "crossing")
        except ValueError:
            out.row("nan", 1.0, float(n), "no-crossing")
    out.close()
    return status


def cmd_sweep(args) -> int:
    out = _CsvOut(args.out, "sweep", _echo(args))
    out.row("alpha", "mean_photons", "delta_phi1", "q", "quantity_name", "value")
    for row in quantum.sweep(args.quantity, args.alpha, args.dphi, args.q):
        out.row(*row)
    out.close()
    return 0


def _parse_complexity(items):
    pairs = []
    for item in items or []:
        k0, _, ns = item.partition(":")
        pairs.append((int(k0), int(ns)))
    return pairs


def cmd_attack(args) -> int:
    p = _params(args)
    model = _model(args, p)
    xor = None
    if args.capture or args.truth:
        if not (args.capture and args.truth):
            raise ConfigError("--capture needs a matching --truth file")
        frames = channel.read_frames(args.capture)
        truth = np.concatenate(_read_truth(args.truth)) if frames else np.zeros(0)
    else:
        src, rep_src = _sources(_seed(args), 2)
        n_frames = max(1, math.ceil(args.bits / p.L))
        truth_parts, frames = [], []
        for _ in range(n_frames):
            r = fresh_bits(src, p.L)
            bases = protocol.emission_bases(fresh_bits(src, p.L), p)
            frames.append(channel.SignalFrame.from_params(p, emit_indices(r, bases, p, model, src)))
            truth_parts.append(r)
            # second emission of the same bits on the same bases for the XOR demo
            frames.append(channel.SignalFrame.from_params(
                p, emit_indices(r, bases, p, model, rep_src)))
        xor = attack.xor_correlation_demo(frames)
        frames = frames[0::2]
        truth = np.concatenate(truth_parts)
    res = attack.run_guessing_attack(frames, truth, p, model)
    out = _CsvOut(args.out, "attack", _echo(args))
    out.row("metric", "trials", "successes", "rate", "ci_low", "ci_high", "value")
    out.row("guess", res.trials, res.successes, res.success_rate, *res.wilson_interval,
            res.success_rate - 0.5 if res.defined else "nan")
    if xor is not None:
        out.row("xor_entropy", xor.pairs, xor.ones, xor.rate, "", "", xor.entropy)
    pairs = _parse_complexity(args.complexity) or [(p.L, attack.estimate_n_sigma(p))]
    for k0, ns in pairs:
        est = attack.brute_force_complexity(k0, ns)
        out.row(f"log2C[K0={k0},N_sigma={ns}]", "", "", "", "", "", est.log2_combinations)
    out.close()
    return 0


# -- one-time pad demo ---------------------------------------------------------

CIPHER_MAGIC = b"NKOT"
CIPHER_HEADER = struct.Struct("<4sQQ")


def _load_store(path):
    data = json.loads(Path(path).read_text())
    return data, bytes.fromhex(data["key"])


def _save_store(path, data):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
    tmp.replace(path)


def _claim(store_path, offset, length):
    """Mark [offset, offset+length) spent and return the key bytes."""
    data, key = _load_store(store_path)
    spent = data["spent"]
    if offset < spent:
        raise KeyStoreRefusal(f"key region at offset {offset} already used (watermark {spent})")
    if offset + length > len(key):
        raise KeyStoreRefusal(f"key exhausted: need {length} bytes at offset {offset}, "
                              f"store holds {len(key)} bytes")
    data["spent"] = offset + length
    _save_store(store_path, data)
    return key[offset:offset + length]


def _xor(data: bytes, key: bytes) -> bytes:
    return (np.frombuffer(data, dtype=np.uint8) ^ np.frombuffer(key, dtype=np.uint8)).tobytes()


def cmd_otp_keygen(args) -> int:
    p = _params(args)
    model = _model(args, p)
    k0_src, a_src, b_src = _sources(_seed(args), 3)
    alice, bob = _start_sessions(p, k0_src)
    need_bits = 8 * args.bytes
    a_bits, b_bits, meta, have = [], [], [], 0
    while have < need_bits:
        batches, _ = protocol.run_cycles(alice, bob, 1, model, (a_src, b_src))
        for b in batches:
            d = protocol.privacy_amplify(b, args.ratio)
            a_copy, b_copy = (d.bits, d.received) if b.provenance[1] == "A->B" else \
                (d.received, d.bits)
            a_bits.append(a_copy)
            b_bits.append(b_copy)
            meta.append({"provenance": [len(meta) // 2, b.provenance[1]], "bits": len(d)})
            have += len(d)
    for path, parts in ((args.store, a_bits), (args.peer_store, b_bits)):
        if path is None:
            continue
        key = np.packbits(np.concatenate(parts)[:need_bits]).tobytes()
        _save_store(path, {"format": "noisekey-keystore", "version": 1,
                           "key": key.hex(), "batches": meta, "spent": 0})
    return 0


def cmd_otp_encrypt(args) -> int:
    plain = Path(args.input).read_bytes()
    data, _ = _load_store(args.store)
    offset = data["spent"] if args.offset is None else args.offset
    key = _claim(args.store, offset, len(plain))
    Path(args.output).write_bytes(CIPHER_HEADER.pack(CIPHER_MAGIC, offset, len(plain))
                                  + _xor(plain, key))
    return 0


def cmd_otp_decrypt(args) -> int:
    blob = Path(args.input).read_bytes()
    magic, offset, length = CIPHER_HEADER.unpack_from(blob)
    if magic != CIPHER_MAGIC or len(blob) != CIPHER_HEADER.size + length:
        raise ConfigError("not a noisekey ciphertext")
    key = _claim(args.store, offset, length)
    Path(args.output).write_bytes(_xor(blob[CIPHER_HEADER.size:], key))
    return 0


# -- argument parsing ----------------------------------------------------------

def _add_protocol_args(sp, L=4096):
    sp.add_argument("--encoding", choices=("sector", "wheel"), default="sector")
    sp.add_argument("--M", type=int, default=2, help="number of bases on the wheel")
    sp.add_argument("--n", type=float, default=25.0, help="mean photons per bit")
    sp.add_argument("--dphi", type=float, default=0.01, help="sector basis spacing (rad)")
    sp.add_argument("--L", type=int, default=L, help="bits per half-cycle")
    sp.add_argument("--noise", choices=[k.value for k in NoiseKind], default="gaussian")
    sp.add_argument("--sigma", type=float, default=None, help="override the noise width")
    sp.add_argument("--seed", type=int, default=None, help=f"test seed (env {SEED_ENV} wins)")
    sp.add_argument("--force", action="store_true", help="run insecure configurations")
    sp.add_argument("--out", default="-")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisekey", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"noisekey {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run protocol cycles and write per-half-cycle stats")
    _add_protocol_args(sp)
    sp.add_argument("--cycles", type=int, default=1)
    sp.add_argument("--capture", help="write tapped frames to this .nkdf file")
    sp.add_argument("--truth", help="write the senders' bits (one line per frame)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("entropy-scan", help="Von Neumann entropy versus alpha")
    sp.add_argument("--alpha-min", type=float, default=0.0)
    sp.add_argument("--alpha-max", type=float, default=3.0)
    sp.add_argument("--points", type=int, default=60)
    sp.add_argument("--numeric", action="store_true", help="add the exact-overlap column")
    sp.add_argument("--dphi", type=float, default=1e-3)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_entropy_scan)

    sp = sub.add_parser("phase-dist", help="Pegg-Barnett phase distribution of the sector")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--n", type=float, default=25.0)
    g.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--dphi", type=float, required=True)
    sp.add_argument("--q", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_phase_dist)

    sp = sub.add_parser("snr-scan", help="phase SNR versus delta_phi1")
    sp.add_argument("--n", type=float, nargs="+", default=[25.0, 400.0])
    sp.add_argument("--dphi-min", type=float, default=1e-3)
    sp.add_argument("--dphi-max", type=float, default=1.0)
    sp.add_argument("--points", type=int, default=31)
    sp.add_argument("--q", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_snr_scan)

    sp = sub.add_parser("sweep", help="long-format sweep of one analysis quantity")
    sp.add_argument("--quantity", choices=quantum.QUANTITIES, required=True)
    sp.add_argument("--alpha", type=float, nargs="+", required=True)
    sp.add_argument("--dphi", type=float, nargs="+", default=[0.01])
    sp.add_argument("--q", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("attack", help="Bayes guessing attack, XOR demo and search complexity")
    _add_protocol_args(sp)
    sp.add_argument("--bits", type=int, default=100_000, help="bits for a live simulation")
    sp.add_argument("--capture", help="attack a captured .nkdf file instead")
    sp.add_argument("--truth", help="truth file matching --capture")
    sp.add_argument("--complexity", nargs="*", metavar="K0:N_SIGMA")
    sp.set_defaults(func=cmd_attack)

    otp = sub.add_parser("otp", help="one-time-pad demo on distilled key batches")
    osub = otp.add_subparsers(dest="otp_command", required=True)
    sp = osub.add_parser("keygen", help="distribute and distil key material into stores")
    _add_protocol_args(sp)
    sp.add_argument("--bytes", type=int, required=True)
    sp.add_argument("--ratio", type=float, default=0.5)
    sp.add_argument("--store", required=True, help="initiator's key store")
    sp.add_argument("--peer-store", help="responder's key store")
    sp.set_defaults(func=cmd_otp_keygen)
    for name, fn in (("encrypt", cmd_otp_encrypt), ("decrypt", cmd_otp_decrypt)):
        sp = osub.add_parser(name)
        sp.add_argument("--store", required=True)
        sp.add_argument("--in", dest="input", required=True)
        sp.add_argument("--out", dest="output", required=True)
        if name == "encrypt":
            sp.add_argument("--offset", type=int, default=None)
        sp.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyStoreRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except quantum.AccuracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
