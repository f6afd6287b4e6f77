from headwayrl.commands import ablate, evaluate, gen_data, optimize, replay, scenario, sweep, train

COMMANDS = [gen_data, train, evaluate, optimize, scenario, sweep, ablate, replay]


def register_all(subparsers) -> None:
    for module in COMMANDS:
        module.register(subparsers)
