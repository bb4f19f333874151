"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

import functools
import inspect
import time

RESULTS: dict[int, str] = {}


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            detail = {}
            try:
                fn(*args, detail=detail, **kwargs)
            except BaseException as exc:
                _record(number, "FAIL", title, detail, time.perf_counter() - t0, exc)
                raise
            _record(number, "PASS", title, detail, time.perf_counter() - t0)

        # hide the injected ``detail`` argument from pytest's fixture lookup
        sig = inspect.signature(fn)
        run.__signature__ = sig.replace(parameters=[p for p in sig.parameters.values() if p.name != "detail"])
        return run

    return wrap


def _record(number, status, title, detail, seconds, exc=None):
    facts = ", ".join(f"{k}={_fmt(v)}" for k, v in detail.items())
    why = f" [{type(exc).__name__}: {str(exc).splitlines()[0][:120] if str(exc) else ''}]" if exc else ""
    line = f"criterion {number:2d} {status}  {title} ({seconds:.1f}s) {facts}{why}"
    RESULTS[number] = line
    print(line)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)
