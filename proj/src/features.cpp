#include "partlift/features.hpp"

#include "partlift/parallel.hpp"
#include "partlift/projection.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>

namespace partlift {

ViewCells build_cell_index(const VisibilityMap& vis, std::size_t view, int m) {
  if (m < 1) throw Error("build_cell_index: m must be >= 1");
  const ViewVisibility& vv = vis.views.at(view);
  ViewCells out;
  out.m = m;
  out.cells.resize(static_cast<std::size_t>(m) * m);
  out.cell_of.assign(vv.size(), -1);
  for (PointIndex p = 0; p < vv.size(); ++p) {
    if (!vv.visible[p]) continue;
    const long x = containing_pixel(vv.pixel[p].x());
    const long y = containing_pixel(vv.pixel[p].y());
    // Visible points have in-image pixels, so x, y >= 0 and division is floor.
    const long u = std::clamp<long>(x * m / vv.width, 0, m - 1);
    const long v = std::clamp<long>(y * m / vv.height, 0, m - 1);
    const auto cell = static_cast<std::int32_t>(v * m + u);
    out.cell_of[p] = cell;
    out.cells[static_cast<std::size_t>(cell)].push_back(p);
  }
  return out;
}

CellPointIndex build_cell_index(const VisibilityMap& vis, int m) {
  CellPointIndex out;
  out.m = m;
  out.views.resize(vis.num_views());
  parallel_for(vis.num_views(), [&](std::size_t k) { out.views[k] = build_cell_index(vis, k, m); });
  return out;
}

std::optional<Correspondence> correspond(std::size_t i, int u, int v, std::size_t k,
                                         const CellPointIndex& index) {
  const std::vector<PointIndex>& source = index.views.at(i).points(u, v);
  if (source.empty()) return std::nullopt;
  const ViewCells& target = index.views.at(k);
  std::map<std::pair<int, int>, std::size_t> overlap;  // keyed (u', v')
  for (PointIndex p : source) {
    const std::int32_t cell = target.cell_of[p];
    if (cell >= 0) ++overlap[{cell % target.m, cell / target.m}];
  }
  if (overlap.empty()) return std::nullopt;
  auto best = overlap.begin();
  for (auto it = overlap.begin(); it != overlap.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return Correspondence{k, best->first.first, best->first.second,
                        static_cast<double>(best->second) / static_cast<double>(source.size())};
}

std::vector<Correspondence> contributions(std::size_t i, int u, int v, const CellPointIndex& index) {
  std::vector<Correspondence> out;
  for (std::size_t k = 0; k < index.views.size(); ++k) {
    if (auto c = correspond(i, u, v, k, index)) out.push_back(*c);
  }
  return out;
}

std::vector<FeatureMap> aggregate(const std::vector<FeatureMap>& maps, const CellPointIndex& index) {
  if (maps.size() != index.views.size()) throw Error("aggregate: one map per indexed view expected");
  for (const FeatureMap& f : maps) {
    if (f.m != index.m || f.c != maps.front().c) throw Error("aggregate: maps disagree in shape");
  }
  std::vector<FeatureMap> out = maps;
  parallel_for(maps.size(), [&](std::size_t i) {
    const int m = index.m;
    const int c = maps[i].c;
    std::vector<double> sum(static_cast<std::size_t>(c));
    for (int v = 0; v < m; ++v) {
      for (int u = 0; u < m; ++u) {
        const auto parts = contributions(i, u, v, index);
        if (parts.empty()) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        double total = 0.0;
        for (const Correspondence& corr : parts) {
          const FeatureMap& src = maps[corr.view];
          for (int ch = 0; ch < c; ++ch) sum[ch] += corr.weight * src.at(corr.u, corr.v, ch);
          total += corr.weight;
        }
        for (int ch = 0; ch < c; ++ch) out[i].at(u, v, ch) = static_cast<float>(sum[ch] / total);
      }
    }
  });
  return out;
}

std::vector<std::vector<FeatureMap>> aggregate_pyramid(
    const std::vector<std::vector<FeatureMap>>& levels, const VisibilityMap& vis) {
  std::vector<std::vector<FeatureMap>> out;
  out.reserve(levels.size());
  for (const auto& level : levels) {
    if (level.empty()) throw Error("aggregate_pyramid: empty level");
    out.push_back(aggregate(level, build_cell_index(vis, level.front().m)));
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'P', 'L', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;

void put(std::ostream& out, std::uint64_t value, int bytes) {
  for (int b = 0; b < bytes; ++b) out.put(static_cast<char>((value >> (8 * b)) & 0xff));
}

std::uint64_t get(std::istream& in, int bytes) {
  std::uint64_t value = 0;
  for (int b = 0; b < bytes; ++b) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) throw Error("PLFM: unexpected end of file");
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * b);
  }
  return value;
}

}  // namespace

void write_plfm(std::ostream& out, const std::vector<FeatureMap>& maps) {
  const int m = maps.empty() ? 0 : maps.front().m;
  const int c = maps.empty() ? 0 : maps.front().c;
  for (const FeatureMap& f : maps) {
    if (f.m != m || f.c != c) throw Error("PLFM: maps disagree in shape");
  }
  out.write(kMagic, 4);
  put(out, kVersion, 2);
  put(out, maps.size(), 4);
  put(out, static_cast<std::uint64_t>(m), 4);
  put(out, static_cast<std::uint64_t>(c), 4);
  for (const FeatureMap& f : maps) {
    for (float x : f.values) put(out, std::bit_cast<std::uint32_t>(x), 4);
  }
  if (!out) throw Error("PLFM: write failed");
}

std::vector<FeatureMap> read_plfm(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw Error("PLFM: bad magic");
  const auto version = get(in, 2);
  if (version != kVersion) throw Error("PLFM: unsupported version " + std::to_string(version));
  const auto k = get(in, 4);
  const auto m = get(in, 4);
  const auto c = get(in, 4);
  if (k > 0 && (m < 1 || c < 1)) throw Error("PLFM: m and c must be >= 1");
  if (m > 65536 || c > 65536) throw Error("PLFM: implausible map shape");
  std::vector<FeatureMap> maps;
  for (std::uint64_t v = 0; v < k; ++v) {
    FeatureMap f(static_cast<int>(m), static_cast<int>(c));
    for (float& x : f.values) {
      x = std::bit_cast<float>(static_cast<std::uint32_t>(get(in, 4)));
      if (!std::isfinite(x)) throw Error("PLFM: non-finite value in view " + std::to_string(v));
    }
    maps.push_back(std::move(f));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("PLFM: trailing bytes");
  return maps;
}

void write_plfm(const std::string& path, const std::vector<FeatureMap>& maps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_plfm(out, maps);
}

std::vector<FeatureMap> read_plfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_plfm(in);
}

}  // namespace partlift
