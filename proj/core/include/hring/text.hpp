#pragma once

// Small text helpers shared by the serializers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hring {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text) noexcept;
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);
/// Round-trip formatting of a double ("%.17g").
std::string format_double(double v);
std::string join_doubles(const std::vector<double>& v, char sep = ',');
std::vector<double> split_doubles(const std::string& text, char sep = ',');

}  // namespace hring
