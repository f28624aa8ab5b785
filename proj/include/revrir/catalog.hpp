#pragma once

// Room-class universe: shoebox geometries enumerated from per-type dimension
// grids. Lengths are held as integer millimeters so grid membership and
// catalog equality are exact.

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace revrir::catalog {

class Length {
 public:
  constexpr Length() = default;
  static constexpr Length from_mm(std::int64_t mm) { return Length(mm); }
  /// Rounds to the millimeter grid; rejects values that are not on it.
  static Length from_meters(double meters);

  constexpr std::int64_t mm() const { return mm_; }
  constexpr double meters() const { return static_cast<double>(mm_) / 1000.0; }

  friend constexpr auto operator<=>(Length, Length) = default;

 private:
  constexpr explicit Length(std::int64_t mm) : mm_(mm) {}
  std::int64_t mm_ = 0;
};

/// Closed grid [min, max] with step `hop`.
struct DimensionRange {
  Length min;
  Length max;
  Length hop;

  static DimensionRange meters(double min, double max, double hop);
  void validate() const;
};

enum class RoomType { Small = 0, Large = 1, Hall = 2 };

inline constexpr std::array<RoomType, 3> kRoomTypes = {
    RoomType::Small, RoomType::Large, RoomType::Hall};

const char* to_string(RoomType type);
RoomType room_type_from_string(const std::string& name);

struct TypeRanges {
  DimensionRange width;
  DimensionRange depth;
  DimensionRange height;
};

struct RoomKey {
  RoomType type;
  Length width;
  Length depth;
  Length height;

  friend auto operator<=>(const RoomKey&, const RoomKey&) = default;
};

struct RoomSpec {
  int class_id = 0;
  RoomType type = RoomType::Small;
  Length width;
  Length depth;
  Length height;

  RoomKey key() const { return {type, width, depth, height}; }
  double volume() const {
    return width.meters() * depth.meters() * height.meters();
  }
  friend bool operator==(const RoomSpec&, const RoomSpec&) = default;
};

/// Grids for Small, Large and Hall (indexed by RoomType) plus an explicit
/// list of grid points to drop.
struct CatalogRanges {
  std::array<TypeRanges, 3> types;
  std::vector<RoomKey> exclusions;
};

class Catalog {
 public:
  Catalog() = default;
  /// Validates consecutive class ids and unique geometries.
  explicit Catalog(std::vector<RoomSpec> rooms);

  const std::vector<RoomSpec>& rooms() const { return rooms_; }
  std::size_t size() const { return rooms_.size(); }
  const RoomSpec& room(int class_id) const;
  RoomType room_type_of(int class_id) const;
  std::size_t count(RoomType type) const;

  friend bool operator==(const Catalog&, const Catalog&) = default;

 private:
  std::vector<RoomSpec> rooms_;
};

/// min, min+hop, ..., max.
std::vector<Length> expand_range(const DimensionRange& range);

/// Cartesian product per type, concatenated Small -> Large -> Hall, with class
/// ids assigned in enumeration order (width-major, then depth, then height).
Catalog enumerate_rooms(const CatalogRanges& ranges);

inline RoomType room_type_of(const Catalog& catalog, int class_id) {
  return catalog.room_type_of(class_id);
}

/// Full grids as published for the three room types (18 / 64 / 42 rooms).
CatalogRanges paper_ranges();
/// Full grids minus an explicit 14-room exclusion list giving 16 / 52 / 42.
CatalogRanges paper110_ranges();
/// Six rooms, two per type.
CatalogRanges desk_ranges();

// Text format, version 1:
//   revrir-catalog v1
//   <class_id> <type> <width_m> <depth_m> <height_m>
// one record per line, '#' starts a comment line.
void write_catalog(std::ostream& out, const Catalog& catalog);
Catalog read_catalog(std::istream& in);
std::string catalog_to_string(const Catalog& catalog);
Catalog catalog_from_string(const std::string& text);

}  // namespace revrir::catalog
