#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

namespace scfm {

using MetricValue = std::variant<std::int64_t, double>;
using MetricMap = std::map<std::string, MetricValue>;

// Canonical flat JSON object: keys sorted (std::map order), reals printed
// with 17 significant digits, so equal inputs serialize byte-identically.
// Non-finite reals raise DomainError naming the offending key.
std::string canonical_metrics_json(const MetricMap& values);

void emit_metrics(const std::filesystem::path& path, const MetricMap& values);

} // namespace scfm
