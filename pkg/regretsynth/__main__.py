import sys

from .cli import run_command


def main() -> None:
    '''Run the command line utility.'''
    try:
        code = run_command()
    except KeyboardInterrupt:
        print()
        code = 1
    sys.exit(code)


if __name__ == '__main__':
    main()
