"""Build an argparse parser from a dataclass config, so every field is a flag."""
import argparse
import dataclasses


def parse_config(cls, argv=None, description=None):
    parser = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            parser.add_argument(flag, type=lambda s, k=kind: tuple(k(v) for v in s.split(",")), default=default)
        else:
            parser.add_argument(flag, type=type(default), default=default)
    return cls(**vars(parser.parse_args(argv)))
