#pragma once

#include <json.hpp>

#include <cstdint>

namespace llot {

inline constexpr int kSchemaVersion = 1;

struct SelftestOutcome {
    nlohmann::ordered_json report;
    bool passed = true;
};

/// Property suite on the built-in desk fixtures. The report holds no timings or host data,
/// so equal seeds give byte-identical output.
SelftestOutcome run_selftest(std::uint64_t seed);

}  // namespace llot
