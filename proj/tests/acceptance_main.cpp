#include "mcot/verification.hpp"

#include <iostream>

int main() {
    std::size_t failed = 0;
    const auto results = mcot::run_acceptance({}, [](const mcot::CheckResult& r) {
        std::cout << mcot::format_check(r) << std::endl;
    });
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (results.size() - failed) << "/" << results.size() << " acceptance criteria passed\n";
    return failed == 0 ? 0 : 1;
}
