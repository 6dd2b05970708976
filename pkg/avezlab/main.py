from contextlib import contextmanager
import sys
import time

from avezlab.cli import run


def main():
    name = sys.argv[1] if len(sys.argv) > 1 else 'avezlab'
    with stop_watch(name):
        code = run()
    sys.exit(code)


@contextmanager
def stop_watch(name):
    start_time = time.time()
    yield
    elapsed_time = time.time() - start_time
    # stdout carries the JSON report
    print('⌛ [{}] finished in {} ms'.format(
        name, int(elapsed_time * 1_000)), file=sys.stderr)


if __name__ == '__main__':
    main()
