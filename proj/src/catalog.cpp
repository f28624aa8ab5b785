#include "revrir/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "revrir/error.hpp"

namespace revrir::catalog {

Length Length::from_meters(double meters) {
  require(std::isfinite(meters), ErrorKind::Validation, "length is not finite");
  const double mm = meters * 1000.0;
  const double rounded = std::round(mm);
  require(std::abs(mm - rounded) < 1e-6, ErrorKind::Validation,
          "length " + std::to_string(meters) + " m is not on the millimeter grid");
  return Length(static_cast<std::int64_t>(rounded));
}

DimensionRange DimensionRange::meters(double min, double max, double hop) {
  DimensionRange r{Length::from_meters(min), Length::from_meters(max),
                   Length::from_meters(hop)};
  r.validate();
  return r;
}

void DimensionRange::validate() const {
  require(hop.mm() > 0, ErrorKind::Validation, "range hop must be positive");
  require(min <= max, ErrorKind::Validation, "range min exceeds max");
  require(min.mm() > 0, ErrorKind::Validation, "room dimensions must be positive");
  require((max.mm() - min.mm()) % hop.mm() == 0, ErrorKind::Validation,
          "range span is not a multiple of hop");
}

const char* to_string(RoomType type) {
  switch (type) {
    case RoomType::Small: return "small";
    case RoomType::Large: return "large";
    case RoomType::Hall: return "hall";
  }
  return "?";
}

RoomType room_type_from_string(const std::string& name) {
  for (RoomType t : kRoomTypes) {
    if (name == to_string(t)) return t;
  }
  fail(ErrorKind::Format, "unknown room type '" + name + "'");
}

std::vector<Length> expand_range(const DimensionRange& range) {
  range.validate();
  std::vector<Length> out;
  for (std::int64_t v = range.min.mm(); v <= range.max.mm(); v += range.hop.mm()) {
    out.push_back(Length::from_mm(v));
  }
  return out;
}

Catalog::Catalog(std::vector<RoomSpec> rooms) : rooms_(std::move(rooms)) {
  std::set<RoomKey> seen;
  for (std::size_t i = 0; i < rooms_.size(); ++i) {
    const RoomSpec& r = rooms_[i];
    require(r.class_id == static_cast<int>(i), ErrorKind::Validation,
            "class ids must be consecutive from 0");
    require(r.width.mm() > 0 && r.depth.mm() > 0 && r.height.mm() > 0,
            ErrorKind::Validation, "room dimensions must be positive");
    require(seen.insert(r.key()).second, ErrorKind::Validation,
            "duplicate room geometry at class " + std::to_string(i));
  }
}

const RoomSpec& Catalog::room(int class_id) const {
  require(class_id >= 0 && static_cast<std::size_t>(class_id) < rooms_.size(),
          ErrorKind::Lookup,
          "class id " + std::to_string(class_id) + " outside catalog of " +
              std::to_string(rooms_.size()));
  return rooms_[static_cast<std::size_t>(class_id)];
}

RoomType Catalog::room_type_of(int class_id) const { return room(class_id).type; }

std::size_t Catalog::count(RoomType type) const {
  return static_cast<std::size_t>(std::count_if(
      rooms_.begin(), rooms_.end(), [&](const RoomSpec& r) { return r.type == type; }));
}

Catalog enumerate_rooms(const CatalogRanges& ranges) {
  std::set<RoomKey> excluded(ranges.exclusions.begin(), ranges.exclusions.end());
  std::set<RoomKey> used;
  std::vector<RoomSpec> rooms;
  for (RoomType type : kRoomTypes) {
    const TypeRanges& tr = ranges.types[static_cast<std::size_t>(type)];
    const auto widths = expand_range(tr.width);
    const auto depths = expand_range(tr.depth);
    const auto heights = expand_range(tr.height);
    for (Length w : widths) {
      for (Length d : depths) {
        for (Length h : heights) {
          const RoomKey key{type, w, d, h};
          if (excluded.contains(key)) {
            used.insert(key);
            continue;
          }
          RoomSpec spec;
          spec.class_id = static_cast<int>(rooms.size());
          spec.type = type;
          spec.width = w;
          spec.depth = d;
          spec.height = h;
          rooms.push_back(spec);
        }
      }
    }
  }
  require(used.size() == excluded.size(), ErrorKind::Validation,
          "exclusion list names a room that is not on any grid");
  require(!rooms.empty(), ErrorKind::Validation, "catalog enumeration is empty");
  return Catalog(std::move(rooms));
}

CatalogRanges paper_ranges() {
  CatalogRanges r;
  r.types[0] = {DimensionRange::meters(1.5, 3.5, 1.0), DimensionRange::meters(2.5, 4.5, 1.0),
                DimensionRange::meters(2.5, 3.0, 0.5)};
  r.types[1] = {DimensionRange::meters(6.0, 13.0, 1.0), DimensionRange::meters(6.0, 12.0, 2.0),
                DimensionRange::meters(2.5, 3.5, 1.0)};
  r.types[2] = {DimensionRange::meters(1.0, 3.0, 1.0), DimensionRange::meters(7.0, 13.0, 1.0),
                DimensionRange::meters(2.5, 3.5, 1.0)};
  return r;
}

CatalogRanges paper110_ranges() {
  CatalogRanges r = paper_ranges();
  auto key = [](RoomType t, double w, double d, double h) {
    return RoomKey{t, Length::from_meters(w), Length::from_meters(d), Length::from_meters(h)};
  };
  // Chosen so the per-type counts come out 16 / 52 / 42. The selection is a
  // configuration choice, not a derived rule.
  for (double h : {2.5, 3.0}) r.exclusions.push_back(key(RoomType::Small, 3.5, 2.5, h));
  const double large_pairs[][2] = {{10, 6}, {11, 6}, {12, 6}, {13, 6}, {12, 8}, {13, 8}};
  for (const auto& p : large_pairs) {
    for (double h : {2.5, 3.5}) r.exclusions.push_back(key(RoomType::Large, p[0], p[1], h));
  }
  return r;
}

CatalogRanges desk_ranges() {
  CatalogRanges r;
  r.types[0] = {DimensionRange::meters(1.5, 3.5, 2.0), DimensionRange::meters(3.5, 3.5, 1.0),
                DimensionRange::meters(2.5, 2.5, 0.5)};
  r.types[1] = {DimensionRange::meters(6.0, 12.0, 6.0), DimensionRange::meters(8.0, 8.0, 2.0),
                DimensionRange::meters(3.5, 3.5, 1.0)};
  r.types[2] = {DimensionRange::meters(1.0, 3.0, 2.0), DimensionRange::meters(13.0, 13.0, 1.0),
                DimensionRange::meters(2.5, 2.5, 1.0)};
  return r;
}

namespace {
constexpr const char* kCatalogHeader = "revrir-catalog v1";

std::string format_meters(Length l) {
  std::ostringstream ss;
  ss << l.mm() / 1000 << '.' << std::setw(3) << std::setfill('0') << l.mm() % 1000;
  return ss.str();
}
}  // namespace

void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << kCatalogHeader << '\n';
  out << "# class_id type width_m depth_m height_m\n";
  for (const RoomSpec& r : catalog.rooms()) {
    out << r.class_id << ' ' << to_string(r.type) << ' ' << format_meters(r.width) << ' '
        << format_meters(r.depth) << ' ' << format_meters(r.height) << '\n';
  }
}

Catalog read_catalog(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kCatalogHeader,
          ErrorKind::Format, "catalog file lacks '" + std::string(kCatalogHeader) + "' header");
  std::vector<RoomSpec> rooms;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    RoomSpec r;
    std::string type;
    double w = 0, d = 0, h = 0;
    if (!(ls >> r.class_id >> type >> w >> d >> h)) {
      fail(ErrorKind::Format, "malformed catalog record at line " + std::to_string(lineno));
    }
    r.type = room_type_from_string(type);
    r.width = Length::from_meters(w);
    r.depth = Length::from_meters(d);
    r.height = Length::from_meters(h);
    rooms.push_back(r);
  }
  return Catalog(std::move(rooms));
}

std::string catalog_to_string(const Catalog& catalog) {
  std::ostringstream ss;
  write_catalog(ss, catalog);
  return ss.str();
}

Catalog catalog_from_string(const std::string& text) {
  std::istringstream ss(text);
  return read_catalog(ss);
}

}  // namespace revrir::catalog
