import argparse
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from allocation import allocate_all, rc_feasible_all
from channel_model import ChannelRealization, FadingConfig, SystemGeometry, generate_channel
from checks import evaluate_claims
from errors import ConfigError, ConsistencyError, DomainError
from experiments import EXPERIMENTS, ExperimentConfig, run_experiment, write_bytes_atomic, write_text_atomic
from mode_selection import Policy, decide_subcarriers
from rate_engine import Branch, LinkGains, PowerPair, dc_secure_rate, effective_rate_cases, link_rates, mrc_secure_rate, secure_rate
from sweep_report import generate_sweep_report

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
MODE_SELECT_COLUMNS = ["n", "class", "rho_l", "rho", "rho_h", "p_th", "mode", "rate_rc", "rate_dc"]

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class CliConfig:
    command: str
    experiment: Optional[str] = None
    channel: Optional[str] = None
    geometry: Optional[str] = None
    config: Optional[str] = None
    output: Optional[str] = None
    report: Optional[str] = None
    p_source: Optional[float] = None
    p_relay: Optional[float] = None
    alpha: Optional[float] = None
    policy: Optional[str] = None
    seed: Optional[int] = None
    num_subcarriers: Optional[int] = None
    num_users: Optional[int] = None
    trials: Optional[int] = None
    eta: Optional[float] = None
    sigma2: Optional[float] = None
    workers: Optional[int] = None
    verbosity: int = 0

    def overrides(self) -> Dict[str, Any]:
        """Experiment settings given on the command line (flags beat the config file)."""
        return {
            "master_seed": self.seed,
            "num_subcarriers": self.num_subcarriers,
            "num_users": self.num_users,
            "trials": self.trials,
            "path_loss_exponent": self.eta,
            "sigma2": self.sigma2,
        }


def _nonnegative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def _positive_float(text: str) -> float:
    value = _nonnegative_float(text)
    if value == 0:
        raise argparse.ArgumentTypeError(f"must be > 0: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secrelay",
        description="Secure rates, allocation and mode selection for a DF relay OFDMA downlink with untrusted users.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    channel = sub.add_parser("channel", help="draw a channel realisation from a geometry file")
    channel.add_argument("--geometry", required=True, help="geometry JSON (source, relay, users)")
    channel.add_argument("--seed", type=_seed, default=0)
    channel.add_argument("-N", "--subcarriers", dest="num_subcarriers", type=_positive_int, default=64)
    channel.add_argument("--eta", type=_nonnegative_float, default=3.0, help="path-loss exponent")
    channel.add_argument("--sigma2", type=_positive_float, default=1.0, help="noise power")
    channel.add_argument("-o", "--output", help="output JSON (default: stdout)")

    rates = sub.add_parser("rates", help="per-user link, effective and secure rates")
    rates.add_argument("--channel", required=True, help="channel JSON")
    rates.add_argument("--ps", dest="p_source", type=_nonnegative_float, required=True)
    rates.add_argument("--pr", dest="p_relay", type=_nonnegative_float, required=True)
    rates.add_argument("-o", "--output", help="output CSV (default: stdout)")

    allocate = sub.add_parser("allocate", help="DC and RC user allocation per subcarrier")
    allocate.add_argument("--channel", required=True, help="channel JSON")
    allocate.add_argument("--ps", dest="p_source", type=_nonnegative_float, required=True)
    allocate.add_argument("--pr", dest="p_relay", type=_nonnegative_float,
                          help="relay power (default: P_s times the RSP ratio of the RC main user)")
    allocate.add_argument("-o", "--output", help="output CSV (default: stdout)")

    mode = sub.add_parser("mode-select", help="RC/DC mode decision per subcarrier")
    mode.add_argument("--channel", required=True, help="channel JSON")
    power = mode.add_mutually_exclusive_group(required=True)
    power.add_argument("--ps", dest="p_source", type=_nonnegative_float)
    power.add_argument("--alpha", type=_nonnegative_float, help="satisfaction level (SNR of the main user)")
    mode.add_argument("--policy", choices=[p.value for p in Policy],
                      help="default: optimal with --ps, satisfaction with --alpha")
    mode.add_argument("-o", "--output", help="output CSV (default: stdout)")

    experiment = sub.add_parser("experiment", help="run one of the Monte-Carlo experiments")
    experiment.add_argument("experiment", choices=sorted(EXPERIMENTS))
    experiment.add_argument("--config", help="experiment config JSON")
    experiment.add_argument("--seed", type=_seed, help="master seed")
    experiment.add_argument("-N", "--subcarriers", dest="num_subcarriers", type=_positive_int)
    experiment.add_argument("-M", "--users", dest="num_users", type=_positive_int)
    experiment.add_argument("--trials", type=_positive_int)
    experiment.add_argument("--eta", type=_nonnegative_float, help="path-loss exponent")
    experiment.add_argument("--sigma2", type=_positive_float, help="noise power")
    experiment.add_argument("--workers", type=int, help="worker processes (0 = auto)")
    experiment.add_argument("-o", "--output", help="output CSV (default: stdout)")
    experiment.add_argument("--report", help="also write a Word report here")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> CliConfig:
    """Parse argv into a CliConfig; usage errors exit with status 2, --help with 0."""
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if k in CliConfig.__dataclass_fields__}
    verbosity = -1 if args.quiet else args.verbose
    return CliConfig(verbosity=verbosity, **values)


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity < 0 else logging.DEBUG if verbosity > 0 else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _load_channel(path: str) -> ChannelRealization:
    return ChannelRealization.from_json(_read_text(path))


def _emit(text: str, output: Optional[str]):
    if output:
        write_text_atomic(output, text)
        logger.info("wrote %s", output)
    else:
        sys.stdout.write(text)


def _frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT)
    return buffer.getvalue()


def rates_frame(channel: ChannelRealization, power: PowerPair) -> pd.DataFrame:
    """Rows n,user,r_sm,r_sr,r_srm,rate,branch,secure_rate; secure_rate takes the row's user as main."""
    shape = channel.gain_su.shape
    gains = LinkGains(channel.gain_su, np.broadcast_to(channel.gain_sr[:, None], shape), channel.gain_ru)
    rates = link_rates(power, gains, channel.noise_power)
    rate, branch = effective_rate_cases(power, gains, channel.noise_power)
    secure = np.column_stack([secure_rate(rate, m) for m in range(channel.num_users)])

    n, user = np.indices(shape)
    return pd.DataFrame({
        "n": n.ravel(),
        "user": user.ravel(),
        "r_sm": np.broadcast_to(rates.r_sm, shape).ravel(),
        "r_sr": np.broadcast_to(rates.r_sr, shape).ravel(),
        "r_srm": np.broadcast_to(rates.r_srm, shape).ravel(),
        "rate": np.asarray(rate).ravel(),
        "branch": [Branch(int(b)).name for b in np.asarray(branch).ravel()],
        "secure_rate": secure.ravel(),
    })


def allocation_frame(channel: ChannelRealization, p_source: float, p_relay: Optional[float] = None) -> pd.DataFrame:
    """Two rows per subcarrier: the DC allocation, then the RC allocation."""
    sigma2 = channel.noise_power
    alloc = allocate_all(channel.gain_sr, channel.gain_su, channel.gain_ru)
    feasible, reason, pr = rc_feasible_all(channel.gain_sr, channel.gain_su, channel.gain_ru, p_source, p_relay, sigma2)
    rate_dc = dc_secure_rate(p_source, alloc.gain_sm, alloc.gain_se_dc, sigma2)
    rate_rc = mrc_secure_rate(PowerPair(p_source, pr), (alloc.gain_sm, alloc.gain_rm), (alloc.gain_se_rc, alloc.gain_re), sigma2)

    rows: List[Dict[str, Any]] = []
    for n in range(channel.num_subcarriers):
        rows.append({
            "n": n, "mode": "DC", "main": int(alloc.dc_main[n]), "eav": int(alloc.dc_eav[n]),
            "p_source": p_source, "p_relay": 0.0, "feasible": bool(alloc.dc_feasible[n]),
            "reason": "OK" if alloc.dc_feasible[n] else "NO_SECRECY",
            "secure_rate": float(np.asarray(rate_dc)[n]),
        })
        rows.append({
            "n": n, "mode": "RC", "main": int(alloc.rc_main[n]), "eav": int(alloc.rc_eav[n]),
            "p_source": p_source, "p_relay": float(pr[n]), "feasible": bool(feasible[n]),
            "reason": str(reason[n]),
            "secure_rate": float(np.asarray(rate_rc)[n]) if feasible[n] else 0.0,
        })
    return pd.DataFrame(rows)


def _cmd_channel(config: CliConfig) -> str:
    try:
        geometry = SystemGeometry.from_dict(json.loads(_read_text(config.geometry)))
    except json.JSONDecodeError as e:
        raise ConfigError(f"geometry file is not valid JSON: {e}") from e
    fading = FadingConfig(config.num_subcarriers, config.eta, config.sigma2, config.seed)
    channel = generate_channel(geometry, fading)
    document = channel.to_dict()
    document.update(channel.metadata)
    return json.dumps(document, indent=2) + "\n"


def _cmd_rates(config: CliConfig) -> str:
    channel = _load_channel(config.channel)
    return _frame_to_csv(rates_frame(channel, PowerPair(config.p_source, config.p_relay)))


def _cmd_allocate(config: CliConfig) -> str:
    channel = _load_channel(config.channel)
    return _frame_to_csv(allocation_frame(channel, config.p_source, config.p_relay))


def _cmd_mode_select(config: CliConfig) -> str:
    channel = _load_channel(config.channel)
    default = Policy.SATISFACTION if config.alpha is not None else Policy.OPTIMAL
    policy = Policy(config.policy) if config.policy else default
    frame = decide_subcarriers(channel, policy, p_source=config.p_source, alpha=config.alpha)
    return _frame_to_csv(frame[MODE_SELECT_COLUMNS])


def _cmd_experiment(config: CliConfig) -> None:
    base = ExperimentConfig.from_json(_read_text(config.config)) if config.config else ExperimentConfig()
    experiment_config = base.with_overrides(**config.overrides())
    result = run_experiment(config.experiment, experiment_config, workers=config.workers)

    claims = evaluate_claims(result)
    for claim in claims:
        logger.info("claim %s: %s (%s)", "holds" if claim.passed else "fails", claim.name, claim.detail)
    report = generate_sweep_report(result, claims).getvalue() if config.report else None

    # the report only lands once the table it describes is on disk
    _emit(result.to_csv_text(), config.output)
    if report is not None:
        write_bytes_atomic(config.report, report)
        logger.info("wrote report %s", config.report)


COMMANDS = {
    "channel": _cmd_channel,
    "rates": _cmd_rates,
    "allocate": _cmd_allocate,
    "mode-select": _cmd_mode_select,
    "experiment": _cmd_experiment,
}


def run(config: CliConfig) -> int:
    """Dispatch a parsed command; returns 0 on success, 1 on domain or I/O errors, 2 on config errors."""
    try:
        text = COMMANDS[config.command](config)
        if text is not None:
            _emit(text, config.output)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ConsistencyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None):
    config = parse_args(argv)
    configure_logging(config.verbosity)
    sys.exit(run(config))


if __name__ == "__main__":
    main()
