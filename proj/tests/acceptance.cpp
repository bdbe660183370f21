// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Scenario constants are pinned here, not tuned at runtime.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "platoon/harness.hpp"
#include "platoon/metrics.hpp"
#include "platoon/sim.hpp"
#include "platoon/verify.hpp"

using namespace platoon;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-34s %s\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str());
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_1_dp_oracle() {
  const DpOracleReport rep = verify_dp_oracle(200, 20240117);
  const bool pass = rep.failures == 0 && rep.instances >= 200 && rep.seconds < 10.0;
  report(1, "DP oracle equivalence", pass,
         fmt("%d instances, %d failures, %.2f s%s%s", rep.instances, rep.failures,
             rep.seconds, rep.failures ? " | " : "",
             rep.failures ? rep.first_failure.c_str() : ""));
}

void criterion_2_safety_invariance() {
  const InvarianceReport rep = verify_safety_invariance(1000, 424242);
  const bool pass = rep.failures == 0 && rep.runs >= 1000 && rep.worst_g2_m >= -1e-6 &&
                    rep.seconds < 60.0;
  report(2, "safety invariance (lemma)", pass,
         fmt("%d runs, min g2 %.3g m, %.2f s", rep.runs, rep.worst_g2_m, rep.seconds));
}

}  // namespace

int main() {
  criterion_1_dp_oracle();
  criterion_2_safety_invariance();
  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
