"""The acceptance suite: twelve gated criteria, one pass/fail line each.

Configurations are pinned in the committed files under
``configs/accept``.  Criteria 4/5 share one half-space run and criteria
11/12 share its tail-energy ledger, mirroring how they are phrased
("same run", "on that run's ledger"); the shared build time is charged
to the first criterion that needs it.
"""

from __future__ import annotations

import dataclasses
import os
import time
from importlib import resources

from .config import parse_config
from .errors import NumericalError, VerificationError
from .experiments import (halfspace_run, run_energy_ledger, run_experiment,
                          run_halfspace_fsp)


@dataclasses.dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget_seconds: float

    @property
    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] criterion {self.number:2d}: {self.title} "
                f"({self.seconds:.1f}s / budget {self.budget_seconds:.0f}s) "
                f"- {self.detail}")


def _load_cfg(name: str, outdir: str):
    text = resources.files("pflab.configs.accept").joinpath(name).read_text()
    return parse_config(text, {"outdir": outdir})


def _attempt(fn):
    """Run a gated experiment; capture the report whether it passes or not."""
    try:
        return fn(), None
    except VerificationError as exc:
        return getattr(exc, "report", {"passed": False}), str(exc)
    except NumericalError as exc:
        return {"passed": False}, f"numerical failure: {exc}"


class AcceptanceContext:
    """Caches the shared half-space trajectory and its reports."""

    def __init__(self, outdir: str):
        self.outdir = outdir
        os.makedirs(outdir, exist_ok=True)
        self._halfspace = None
        self._halfspace_seconds = 0.0
        self._hs_report = None
        self._hs_error = None
        self._energy_report = None
        self._energy_error = None
        self._energy_seconds = None

    def sub(self, name: str) -> str:
        path = os.path.join(self.outdir, name)
        os.makedirs(path, exist_ok=True)
        return path

    def halfspace(self):
        if self._halfspace is None:
            cfg = _load_cfg("c04_halfspace_envelopes.cfg", self.sub("c04"))
            start = time.time()
            self._halfspace = halfspace_run(cfg)
            self._halfspace_seconds = time.time() - start
            self._hs_report, self._hs_error = _attempt(
                lambda: run_halfspace_fsp(cfg, self.sub("c04"),
                                          prebuilt=self._halfspace))
        return self._halfspace

    def halfspace_report(self):
        self.halfspace()
        return self._hs_report, self._hs_error

    def energy_report(self):
        if self._energy_report is None:
            prebuilt = self.halfspace()
            cfg = _load_cfg("c11_energy_ledger.cfg", self.sub("c11"))
            start = time.time()
            self._energy_report, self._energy_error = _attempt(
                lambda: run_energy_ledger(cfg, self.sub("c11"),
                                          prebuilt=prebuilt))
            self._energy_seconds = time.time() - start
        return self._energy_report, self._energy_error, self._energy_seconds


def _simple(ctx, number, title, budget, cfg_name, detail_fn):
    cfg = _load_cfg(cfg_name, ctx.sub(f"c{number:02d}"))
    start = time.time()
    report, error = _attempt(lambda: run_experiment(cfg, ctx.sub(f"c{number:02d}")))
    seconds = time.time() - start
    passed = bool(report.get("passed")) and seconds <= budget
    detail = detail_fn(report) if report.get("passed") is not None else ""
    if error:
        detail = f"{detail}; {error}" if detail else error
    if seconds > budget:
        detail += f"; runtime {seconds:.0f}s exceeded budget"
    return CriterionResult(number, title, passed, detail, seconds, budget)


def criterion_01(ctx):
    return _simple(
        ctx, 1, "1-D front exponent 0.25 within 5%", 120,
        "c01_front_exponent_1d.cfg",
        lambda r: f"slope {r.get('fitted_slope', float('nan')):.5f} "
                  f"vs 0.25 ({r.get('relative_error', float('nan')):.2%} off)")


def criterion_02(ctx):
    return _simple(
        ctx, 2, "2-D radial front exponent 0.2 within 8%", 300,
        "c02_front_exponent_2d.cfg",
        lambda r: f"slope {r.get('fitted_slope', float('nan')):.5f} "
                  f"vs 0.2 ({r.get('relative_error', float('nan')):.2%} off)")


def criterion_03(ctx):
    return _simple(
        ctx, 3, "explicit accuracy order >= 0.8 over three grids", 180,
        "c03_solver_accuracy.cfg",
        lambda r: f"orders {[round(o, 3) for o in r.get('orders', [])]}")


def criterion_04(ctx):
    start = time.time()
    report, error = ctx.halfspace_report()
    seconds = time.time() - start + ctx._halfspace_seconds
    budget = 120.0
    env = report.get("envelope_l2", {})
    ok = bool(env.get("passed")) and seconds <= budget
    detail = (f"c={env.get('c', float('nan')):.4f}, "
              f"max front/envelope = {env.get('max_ratio', float('nan')):.4f}, "
              f"violations {env.get('violations', '?')}")
    if error and not env.get("passed", False):
        detail += f"; {error}"
    if seconds > budget:
        detail += f"; runtime {seconds:.0f}s exceeded budget"
    return CriterionResult(4, "half-space front under the L2-data envelope",
                           ok, detail, seconds, budget)


def criterion_05(ctx):
    ctx.halfspace()  # charged to criterion 4
    start = time.time()
    report, error = ctx.halfspace_report()
    env = report.get("envelope_l1", {})
    hyp = bool(report.get("l1_hypothesis_ok"))
    seconds = time.time() - start
    budget = 120.0
    ok = hyp and bool(env.get("passed")) and seconds <= budget
    detail = (f"L1 max ratio {report.get('l1_max_over_initial', float('nan')):.9f}, "
              f"envelope c={env.get('c', float('nan')):.4f}, "
              f"max front/envelope = {env.get('max_ratio', float('nan')):.4f}")
    if error and not ok:
        detail += f"; {error}"
    return CriterionResult(5, "L1 hypothesis audit + L1-data envelope",
                           ok, detail, seconds, budget)


def criterion_06(ctx):
    return _simple(
        ctx, 6, "Taylor-Green KE decay rate 2*mu1 within 2%, div <= 1e-10",
        180, "c06_taylor_green.cfg",
        lambda r: f"rate {r.get('ke_decay_rate', float('nan')):.5f}, "
                  f"max div {r.get('max_divergence', float('nan')):.2e}")


def criterion_07(ctx):
    return _simple(
        ctx, 7, "weak-form residual refinement order >= 1 (20 test fields)",
        240, "c07_weak_residual.cfg",
        lambda r: f"median order {r.get('median_order', float('nan')):.3f}, "
                  f"min {r.get('min_order', float('nan')):.3f}")


def criterion_08(ctx):
    return _simple(
        ctx, 8, "exponent identities to 1e-12 over the (p, N) grid", 1.0,
        "c08_exponent_identities.cfg",
        lambda r: f"max residual {r.get('max_residual', float('nan')):.2e}")


def criterion_09(ctx):
    return _simple(
        ctx, 9, "iteration lemma: 200/200 seeded cases confirmed by scan", 5.0,
        "c09_stampacchia.cfg",
        lambda r: f"{r.get('passed_cases', 0)}/{r.get('cases', 0)} cases")


def criterion_10(ctx):
    return _simple(
        ctx, 10, "interpolation-constant stability + dilation consistency", 60,
        "c10_interpolation.cfg",
        lambda r: f"{r.get('passed_cases', 0)}/{r.get('cases', 0)} cases")


def criterion_11(ctx):
    ctx.halfspace()  # charged to criterion 4
    report, error, seconds = ctx.energy_report()
    budget = 180.0
    ref = report.get("refinement", {})
    stable = (not ref) or (ref.get("local_ratio_fine", 0.0)
                           <= 1.5 * ref.get("local_ratio_coarse", 0.0) + 1e-300)
    ok = (bool(report.get("local_ratio_all_finite"))
          and report.get("tail_beyond_front_A") == 0.0
          and report.get("tail_beyond_front_B") == 0.0
          and stable and seconds <= budget)
    detail = (f"max ratio {report.get('local_ratio_max', float('nan')):.3f} "
              f"(coarse {ref.get('local_ratio_coarse', float('nan')):.3f}), "
              f"tails beyond front A={report.get('tail_beyond_front_A')}, "
              f"B={report.get('tail_beyond_front_B')}")
    if error and not ok:
        detail += f"; {error}"
    if seconds > budget:
        detail += f"; runtime {seconds:.0f}s exceeded budget"
    return CriterionResult(11, "local energy estimate: finite stable constant, "
                               "empty tails beyond the front", ok, detail,
                           seconds, budget)


def criterion_12(ctx):
    ctx.energy_report()  # charged to criterion 11
    start = time.time()
    report, error, _ = ctx.energy_report()
    seconds = time.time() - start
    budget = 60.0
    ok = (bool(report.get("iteration_covers_front"))
          and bool(report.get("iteration_vanished_beyond")) and seconds <= budget)
    detail = (f"predicted vanishing {report.get('iteration_predicted_vanishing')}"
              f" >= front {report.get('front_at_T')}"
              f" (ctilde {report.get('ctilde_calibrated', float('nan')):.3g})")
    if error and not ok:
        detail += f"; {error}"
    return CriterionResult(12, "iteration mechanism covers the measured front",
                           ok, detail, seconds, budget)


CRITERIA = [criterion_01, criterion_02, criterion_03, criterion_04,
            criterion_05, criterion_06, criterion_07, criterion_08,
            criterion_09, criterion_10, criterion_11, criterion_12]


def run_acceptance(outdir: str = "accept-out", only=None) -> list:
    """Run all (or selected) criteria, printing one line per criterion."""
    wanted = None
    if only:
        wanted = {int(tok) for tok in str(only).split(",")}
    ctx = AcceptanceContext(outdir)
    results = []
    for idx, criterion in enumerate(CRITERIA, start=1):
        if wanted is not None and idx not in wanted:
            continue
        result = criterion(ctx)
        print(result.line, flush=True)
        results.append(result)
    n_pass = sum(1 for r in results if r.passed)
    print(f"acceptance: {n_pass}/{len(results)} criteria passed", flush=True)
    return results
