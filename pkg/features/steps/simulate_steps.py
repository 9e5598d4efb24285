"""
Simulate Steps

Steps file for simulate.feature
"""
import os
import shlex

import pandas as pd
from compare3 import expect
from behave import when, then  # pylint: disable=no-name-in-module

from basketsim.common.cli_commands import simulate


def run(context, args: list, out_dir: str):
    """Invokes the simulate command writing to out_dir"""
    return context.runner.invoke(simulate, [*args, "--out", out_dir])


def summary(out_dir: str) -> pd.DataFrame:
    """Reads summary.csv keeping empty shrinkage cells as empty strings"""
    return pd.read_csv(os.path.join(out_dir, "summary.csv"), keep_default_na=False)


@when('I simulate with "{arguments}"')
def step_impl(context, arguments):
    context.result = run(context, shlex.split(arguments), context.out_dir)


@when('I simulate again with "{arguments}"')
def step_impl(context, arguments):
    context.second_dir = os.path.join(context.out_dir, "second")
    context.second = run(context, shlex.split(arguments), context.second_dir)
    expect(context.second.exit_code).equal_to(0)


@when("I simulate again from the resolved configuration")
def step_impl(context):
    resolved = os.path.join(context.out_dir, "resolved_config.ini")
    context.second_dir = os.path.join(context.out_dir, "second")
    context.second = run(context, ["--config", resolved], context.second_dir)
    expect(context.second.exit_code).equal_to(0)


@then("the command should succeed")
def step_impl(context):
    expect(context.result.exit_code).equal_to(0)


@then("the command should fail with status {status:d}")
def step_impl(context, status):
    expect(context.result.exit_code).equal_to(status)


@then('I should see "{text}" in the output')
def step_impl(context, text):
    expect(text in context.result.output).equal_to(True)


@then('the output directory should hold "{names}"')
def step_impl(context, names):
    written = os.listdir(context.out_dir)
    for name in (item.strip() for item in names.split(",")):
        expect(name in written).equal_to(True)


@then("the summary should have {count:d} rows")
def step_impl(context, count):
    expect(len(summary(context.out_dir))).equal_to(count)


@then("every summary row should have a shrinkage value")
def step_impl(context):
    expect(bool((summary(context.out_dir)["shrinkage"] != "").all())).equal_to(True)


@then("no summary row should have a shrinkage value")
def step_impl(context):
    expect(bool((summary(context.out_dir)["shrinkage"] == "").all())).equal_to(True)


@then('both runs should write identical "{name}" files')
def step_impl(context, name):
    with open(os.path.join(context.out_dir, name), "rb") as first:
        with open(os.path.join(context.second_dir, name), "rb") as second:
            expect(first.read()).equal_to(second.read())
