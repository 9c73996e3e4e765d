#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace credal::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    double seconds = 0.0;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 20240607;
    /// Multiplies every instance count; 1 is the full battery.
    double scale = 1.0;
    /// Test hook: the min-entropy solver is replaced by the max-entropy solver.
    bool inject_min_entropy_fault = false;
};

CheckResult check_softmax_validity(const VerifyOptions& opts);
CheckResult check_degenerate_collapse(const VerifyOptions& opts);
CheckResult check_entropy_oracle(const VerifyOptions& opts);
CheckResult check_min_entropy_enumeration(const VerifyOptions& opts);
CheckResult check_hull_oracle(const VerifyOptions& opts);
CheckResult check_gradient(const VerifyOptions& opts);
CheckResult check_dro_reduction(const VerifyOptions& opts);
CheckResult check_ensemble_decomposition(const VerifyOptions& opts);
CheckResult check_auroc_oracle(const VerifyOptions& opts);

std::vector<CheckResult> run_all(const VerifyOptions& opts);

/// "PASS name measured=... tolerance=... (detail)" per check.
void print_report(std::ostream& out, const std::vector<CheckResult>& checks);

} // namespace credal::verify
