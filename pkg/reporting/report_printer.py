# ============================================================================
# FILE: reporting/report_printer.py
# ============================================================================

from datetime import datetime


class ReportPrinter:
    def __init__(self, width=60):
        self.width = width

    def rule(self, char="="):
        return char * self.width

    def banner(self, title):
        return f"{self.rule()}\n{title}\n{self.rule()}"

    def generate_solve_text(self, summary):
        """Plain text digest of a solve summary"""
        ok = summary["constraint_min"] >= -summary["constraint_tol"]
        text = f"""
{self.banner("📊 SOLVE SUMMARY")}
  Model:            {summary['model_id']}
  Particles (N):    {summary['N']}
  Steps (M):        {summary['M']}
  Scheme:           {summary['scheme']} ({summary['condexp']}, {summary['sweeps']} sweep(s))
  K_T:              {summary['K_T']:.6g}
  Terminal jump:    {summary['dK_T']:.6g}
  Y_0 mean:         {summary['Y0_mean']:.6g}
  Constraint min:   {summary['constraint_min']:.3g} {'✅' if ok else '⚠️'}
  Skorokhod max:    {summary['skorokhod_max']:.3g}
{self.rule()}"""
        return text

    def generate_chaos_text(self, report):
        d = report.to_dict()
        text = f"\n{self.banner('🔬 CHAOS SWEEP: ' + d['model_id'])}\n"
        text += f"  Oracle: {d['oracle'].get('oracle')}   class: {d['model_class']}   reps: {d['reps']}\n"
        text += f"  {'N':>7} {'err_Y':>12} {'± se':>10} {'err_K':>12} {'err_Z':>12}\n"
        for p in d["per_N"]:
            text += (f"  {p['N']:>7} {p['err_Y_mean']:>12.4e} {p['err_Y_se']:>10.2e} "
                     f"{p['err_K_mean']:>12.4e} {p['err_Z_mean']:>12.4e}\n")
        text += f"{self.rule('-')}\n"
        for key, fit in d["fits"].items():
            if fit["slope"] is None:
                text += f"  {key}: no fit (degenerate errors)\n"
                continue
            band = fit["expected_band"]
            mark = "" if band is None else (" ✅" if fit["within_band"] else " ❌")
            band_txt = "" if band is None else f" band [{band[0]}, {band[1]}]"
            floored = f"  ({fit['n_floored']} floored)" if fit["n_floored"] else ""
            text += f"  {key}: slope {fit['slope']:.3f}  r² {fit['r2']:.3f}{band_txt}{mark}{floored}\n"
        trend = "✅" if d["bound_trend_ok"] else "⚠️"
        text += f"  bound trend slope: {d['bound_trend_slope']:.3f} {trend}\n"
        for note in d["notes"]:
            text += f"  note: {note}\n"
        text += self.rule()
        return text

    def generate_validation_text(self, results):
        """Pass/fail table, one line per check"""
        passed = sum(r.passed for r in results)
        text = f"\n{self.banner('🧪 VALIDATION ' + datetime.now().strftime('%Y-%m-%d %H:%M'))}\n"
        for r in results:
            status = "✅ PASS" if r.passed else "❌ FAIL"
            detail = f"  ({r.detail})" if r.detail else ""
            text += f"  {status}  [{r.suite}] {r.name}{detail}\n"
        text += f"{self.rule('-')}\n  {passed}/{len(results)} checks passed\n{self.rule()}"
        return text

    def generate_limit_text(self, solution):
        prov = solution.provenance
        text = f"""
{self.banner("📈 LIMIT SOLUTION")}
  Model:     {prov.get('model_id')}
  Oracle:    {prov.get('oracle')}
  Nodes:     {len(solution.grid.nodes)}
  K_T:       {solution.K_T:.6g}
  Y_0 mean:  {solution.y_mean[0]:.6g}
{self.rule()}"""
        return text
