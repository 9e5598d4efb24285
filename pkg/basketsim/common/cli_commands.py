"""
Command Line Interface

Usage:
    basket-sim --scenarios 1.A.2 --methods sample_proportion --reps 100 --seed 7
    flask simulate ...   (the same command registered on the service)

Flags override the configuration file given with --config.
"""
import logging
import sys
from dataclasses import replace

import click

from basketsim import config
from basketsim.common.log_handlers import init_logging
from basketsim.harness import run_plan, select_scenarios
from basketsim.models import BasketSimError, MethodId
from basketsim.report import RunConfig, emit_results, parse_config, read_config


# scalar flags and the RunConfig fields they set
FLAG_FIELDS = {"reps": "reps", "seed": "seed", "prior_mean": "prior_mean", "workers": "workers", "out": "output_dir"}


def _split(value):
    return [item for item in (part.strip() for part in value.split(",")) if item]


def _overrides(options: dict) -> dict:
    """RunConfig fields set by command-line flags"""
    overrides = {}
    if options["scenarios"] is not None:
        overrides["scenarios"] = select_scenarios(_split(options["scenarios"]))
    if options["methods"] is not None:
        overrides["methods"] = tuple(MethodId.parse(name) for name in _split(options["methods"]))
    if options["sample_sizes"] is not None:
        try:
            overrides["sample_sizes"] = tuple(int(item) for item in _split(options["sample_sizes"]))
        except ValueError as error:
            raise click.BadParameter(
                f"expected comma-separated integers, got '{options['sample_sizes']}'", param_hint="'--sample-sizes'"
            ) from error
    for flag, key in FLAG_FIELDS.items():
        if options[flag] is not None:
            overrides[key] = options[flag]
    return overrides


def build_run_config(options: dict) -> RunConfig:
    """Configuration file (or defaults) with the command-line flags applied"""
    run_config = read_config(options["config_path"]) if options["config_path"] else parse_config("")
    mcmc = run_config.mcmc
    if options["mcmc_iters"] is not None:
        mcmc = replace(mcmc, n_keep=options["mcmc_iters"])
    if options["mcmc_burnin"] is not None:
        mcmc = replace(mcmc, n_burn=options["mcmc_burnin"])
    return replace(run_config, mcmc=mcmc, **_overrides(options))


######################################################################
# Command to run a simulation grid
# Usage:
#   flask simulate --scenarios 2.B --methods berry_bhm,liu_local_mem
######################################################################
@click.command("simulate")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run configuration file")
@click.option("--scenarios", help="Comma-separated scenario ids or families, e.g. 1.A.2,2.B")
@click.option("--methods", help="Comma-separated method names")
@click.option("--sample-sizes", "sample_sizes", help="Comma-separated patients per cohort, e.g. 10,20,30,100")
@click.option("--reps", type=click.IntRange(min=1), help="Replications per scenario and sample size")
@click.option("--seed", type=click.IntRange(min=0), help="Master seed")
@click.option("--prior-mean", "prior_mean", type=click.FloatRange(0, 1, min_open=True, max_open=True), help="Prior mean")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("--workers", type=click.IntRange(min=1), help="Worker processes")
@click.option("--mcmc-iters", "mcmc_iters", type=click.IntRange(min=1), help="Retained MCMC iterations")
@click.option("--mcmc-burnin", "mcmc_burnin", type=click.IntRange(min=0), help="MCMC burn-in iterations")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level")
def simulate(**options):
    """Runs the simulation grid and writes the result tables"""
    logger = init_logging("basketsim", logging.DEBUG if options["verbose"] else config.LOGGING_LEVEL)
    try:
        run_config = build_run_config(options)
        plan = run_config.plan()
        logger.info(
            "Simulating %d scenarios x %d sample sizes x %d methods, %d replications, seed %d",
            len(plan.scenario_ids),
            len(plan.sample_sizes),
            len(plan.methods),
            plan.n_reps,
            plan.master_seed,
        )
        outcome = run_plan(plan)
        paths = emit_results(outcome.records, outcome.cohort_rows, run_config.output_dir, run_config)
    except BasketSimError as error:
        raise click.ClickException(str(error)) from error
    click.echo(f"Wrote {len(outcome.records)} summary rows to {paths[0]}")


def run_cli(args=None) -> int:
    """Runs the simulate command and returns its exit status"""
    try:
        simulate.main(args=args, prog_name="basket-sim", standalone_mode=False)
    except click.ClickException as error:
        error.show()
        return error.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return 0


def main():
    """Console script entry point"""
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
