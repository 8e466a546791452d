#pragma once

#include <string>
#include <vector>

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // worst error (or slope) seen
  std::string detail;
  bool ok() const { return failures == 0 && cases > 0; }
};

SuiteResult suite_tangent_roundtrip(int cases = 500);
SuiteResult suite_rt_constraints(int cases = 500);
SuiteResult suite_s_positivity(int cases = 500);
SuiteResult suite_orbit_volume_identity(int cases = 50);
SuiteResult suite_gaussian_fourier(int cases = 500);
SuiteResult suite_iota_invariant(int cases = 500);
SuiteResult suite_chart_remainder(int cases = 500);
SuiteResult suite_stationary_phase(int phases = 20);
SuiteResult suite_reproducing_kernel(int cases = 500);

std::vector<SuiteResult> run_all_suites();
