"""Reference denoiser plug-in: serves oracle velocities over the stdin/stdout protocol.

Usage: ``python -m refractsync.sync.oracle_plugin TARGET [TARGET ...]``. Each
request is answered with ``(z - target) / sigma`` using the target whose shape
matches the latent, so one process can serve both views.
"""

from __future__ import annotations

import sys

from ..imageops.plane import load_linear
from .denoisers import OracleDenoiser, read_request, write_response


def serve(targets, stdin=None, stdout=None) -> int:
    stdin = sys.stdin.buffer if stdin is None else stdin
    stdout = sys.stdout.buffer if stdout is None else stdout
    by_shape = {t.shape: OracleDenoiser(t) for t in targets}
    while True:
        req = read_request(stdin)
        if req is None:
            return 0
        z, sigma, _ = req
        if z.shape not in by_shape:
            print(f"no target with shape {z.shape}", file=sys.stderr)
            return 1
        write_response(stdout, by_shape[z.shape](z, sigma))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print(__doc__.splitlines()[2], file=sys.stderr)
        return 2
    return serve([load_linear(p).data for p in argv])


if __name__ == "__main__":
    sys.exit(main())
