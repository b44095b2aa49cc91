#pragma once

#include <string>

namespace ifaq {

// Instrumentation counters shared by the reference interpreter and the
// physical execution engine (same JSON schema for both).
struct CostStats {
    long long tuplesScanned = 0;
    long long arithmeticOps = 0;
    long long dictLookups = 0;
    long long dictInserts = 0;
    long long loopIterations = 0;

    std::string toJson() const;
};

}  // namespace ifaq
