#pragma once

#include <functional>
#include <string>
#include <vector>

namespace mcot {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceCheck {
    int id;
    std::string name;
    std::function<CheckResult()> run;
};

/// The acceptance criteria in order; each check is self-contained and
/// builds its own instances from fixed seeds.
std::vector<AcceptanceCheck> acceptance_checks();

/// Runs the selected checks (all when `only` is empty). A check that throws
/// is reported as failed with the exception message.
std::vector<CheckResult> run_acceptance(const std::vector<int>& only = {},
                                        const std::function<void(const CheckResult&)>& on_result = {});

/// `[PASS] 1 name (detail) 0.12s`
std::string format_check(const CheckResult& result);

} // namespace mcot
