import sys

from . import main


def run():
    return main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(run())
