#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "turbkeps/basis.hpp"

namespace turbkeps {

/// One record of the TKEF gridded-field format. Layout, all little-endian:
///   "TKEF" | u32 version | u32 d | u32 N | u32 components |
///   f64 extent[d] | f64 time | f64 values[N^d * components]
/// Values are row-major over nodes (x fastest) with components interleaved.
struct TkefRecord {
    std::uint32_t d = 2;
    std::uint32_t N = 0;
    std::uint32_t components = 1;
    std::array<double, 2> extent{1.0, 1.0};
    double time = 0.0;
    std::vector<double> values;
};

inline constexpr std::uint32_t kTkefVersion = 1;

void write_tkef(std::ostream& out, const TkefRecord& rec);
/// nullopt at a clean end of stream; Error(Data) on a truncated or malformed record.
std::optional<TkefRecord> read_tkef(std::istream& in);
std::vector<TkefRecord> read_tkef_file(const std::filesystem::path& path);

TkefRecord to_record(const DiscreteField& field, double time);
/// Error(Data) unless N and extent match `spec`.
DiscreteField from_record(const TkefRecord& rec, const DomainSpec& spec);

/// Plain-text alternative for scalar input: header "x,y,value", one row per
/// node in any order. Coordinates must hit grid nodes within 1e-9 * extent.
DiscreteField read_csv_field(std::istream& in, const DomainSpec& spec);
void write_csv_field(std::ostream& out, const DiscreteField& field);

/// Scalar field from a .tkef (first record) or .csv file.
DiscreteField load_scalar_field(const std::filesystem::path& path, const DomainSpec& spec);

}  // namespace turbkeps
