#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bnas::arch {

/// One of the six channel expansion ratios {0.25, 0.5, 1, 2, 3, 4}.
class Ratio {
 public:
  static constexpr std::size_t kCount = 6;

  constexpr Ratio() = default;
  /// Throws InputError unless `value` is a candidate ratio.
  static Ratio from_value(double value);
  static constexpr Ratio from_index(std::size_t index) { return Ratio(static_cast<std::uint8_t>(index)); }
  static std::span<const Ratio> all();

  constexpr std::size_t index() const { return index_; }
  double value() const;
  /// The ratio in quarters: 1, 2, 4, 8, 12, 16.
  std::size_t quarters() const;
  /// Exact decimal text: "0.25", "0.5", "1", "2", "3", "4".
  std::string to_string() const;

  constexpr bool operator==(const Ratio&) const = default;
  constexpr auto operator<=>(const Ratio&) const = default;

 private:
  constexpr explicit Ratio(std::uint8_t index) : index_(index) {}
  std::uint8_t index_ = 2;  // 1x
};

/// Per-gene expansion ratios of one candidate architecture.
struct ExpansionCode {
  std::vector<Ratio> genes;

  std::size_t size() const { return genes.size(); }
  std::vector<double> values() const;
  static ExpansionCode from_values(std::span<const double> values);
  std::string to_string() const;

  bool operator==(const ExpansionCode&) const = default;
  auto operator<=>(const ExpansionCode&) const = default;
};

ExpansionCode uniform_code(double ratio, std::size_t n);

}  // namespace bnas::arch
