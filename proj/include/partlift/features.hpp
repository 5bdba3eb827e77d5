#pragma once

#include "partlift/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace partlift {

/// m x m grid of c-channel values for one view, stored (row, col, channel).
/// Cell (u, v) is column u, row v.
struct FeatureMap {
  int m = 0;
  int c = 0;
  std::vector<float> values;

  FeatureMap() = default;
  FeatureMap(int m, int c) : m(m), c(c), values(static_cast<std::size_t>(m) * m * c, 0.0f) {}

  std::size_t offset(int u, int v) const { return (static_cast<std::size_t>(v) * m + u) * c; }
  float& at(int u, int v, int ch) { return values[offset(u, v) + ch]; }
  float at(int u, int v, int ch) const { return values[offset(u, v) + ch]; }
  bool operator==(const FeatureMap&) const = default;
};

/// Visible points of one view binned into an m x m grid over its image.
struct ViewCells {
  int m = 0;
  std::vector<std::vector<PointIndex>> cells;  // v * m + u, ascending point ids
  std::vector<std::int32_t> cell_of;           // per point; -1 if not visible

  const std::vector<PointIndex>& points(int u, int v) const {
    return cells[static_cast<std::size_t>(v) * m + u];
  }
};

struct CellPointIndex {
  int m = 0;
  std::vector<ViewCells> views;
};

/// Bins the visible points of `view`: the point's containing pixel (x, y)
/// lands in cell (floor(x m / W), floor(y m / H)), clamped to the grid.
ViewCells build_cell_index(const VisibilityMap& vis, std::size_t view, int m);
CellPointIndex build_cell_index(const VisibilityMap& vis, int m);

struct Correspondence {
  std::size_t view = 0;
  int u = 0;
  int v = 0;
  double weight = 0.0;  // |P_i(u,v) ∩ P_k(u',v')| / |P_i(u,v)|

  bool operator==(const Correspondence&) const = default;
};

/// Cell of view k holding the most points of P_i(u, v) (lowest (u', v') on
/// ties). nullopt when P_i(u, v) is empty or none of it is visible in k.
std::optional<Correspondence> correspond(std::size_t i, int u, int v, std::size_t k,
                                         const CellPointIndex& index);

/// Every view's correspondence for cell (u, v) of view i, in view order.
/// Includes view i itself with weight 1 unless the cell is empty.
std::vector<Correspondence> contributions(std::size_t i, int u, int v, const CellPointIndex& index);

/// Weighted average of corresponding cells across views. Cells with no
/// visible points keep their value. maps[k] belongs to view k.
std::vector<FeatureMap> aggregate(const std::vector<FeatureMap>& maps, const CellPointIndex& index);

/// aggregate() applied per level, each with a cell grid matching that level.
std::vector<std::vector<FeatureMap>> aggregate_pyramid(
    const std::vector<std::vector<FeatureMap>>& levels, const VisibilityMap& vis);

/// PLFM binary: "PLFM", u16 version, u32 K, m, c, then K*m*m*c f32 in
/// (view, row, col, channel) order, all little-endian.
void write_plfm(std::ostream& out, const std::vector<FeatureMap>& maps);
std::vector<FeatureMap> read_plfm(std::istream& in);
void write_plfm(const std::string& path, const std::vector<FeatureMap>& maps);
std::vector<FeatureMap> read_plfm(const std::string& path);

}  // namespace partlift
