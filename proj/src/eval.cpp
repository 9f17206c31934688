#include "coreg/eval.hpp"

#include "coreg/error.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>

namespace coreg {

BinaryMask boundary_mask(const Segmentation& seg) {
  const int w = seg.width(), h = seg.height();
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const PixelIndex p = y * w + x;
      const RegionId l = seg.label(p);
      const bool edge = (y > 0 && seg.label(p - w) != l) || (x > 0 && seg.label(p - 1) != l) ||
                        (x + 1 < w && seg.label(p + 1) != l) || (y + 1 < h && seg.label(p + w) != l);
      m.at(x, y) = edge ? 1 : 0;
    }
  return m;
}

std::vector<std::pair<int, int>> disk_offsets(double radius) {
  std::vector<std::pair<int, int>> out;
  const int r = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r2) out.emplace_back(dx, dy);
  return out;
}

namespace {

void dilate_row(const BinaryMask& in, BinaryMask& out, const std::vector<std::pair<int, int>>& disk, int y) {
  for (int x = 0; x < in.width; ++x) {
    std::uint8_t v = 0;
    for (auto [dx, dy] : disk) {
      const int sx = x + dx, sy = y + dy;
      if (sx >= 0 && sy >= 0 && sx < in.width && sy < in.height && in.at(sx, sy)) {
        v = 1;
        break;
      }
    }
    out.at(x, y) = v;
  }
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, double radius) {
  const auto disk = disk_offsets(radius);
  BinaryMask out(mask.width, mask.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < mask.height; ++y) dilate_row(mask, out, disk, y);
  return out;
}

BinaryMask dilate_serial(const BinaryMask& mask, double radius) {
  const auto disk = disk_offsets(radius);
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) dilate_row(mask, out, disk, y);
  return out;
}

double mask_jaccard(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) throw DimensionError("mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    inter += (a.values[i] && b.values[i]);
    uni += (a.values[i] || b.values[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double overlapping_rate(const Segmentation& truth, const Segmentation& estimate, int w) {
  if (w < 1) throw DomainError("boundary width must be at least 1");
  if (truth.width() != estimate.width() || truth.height() != estimate.height())
    throw DimensionError("segmentations have different dimensions");
  const double radius = w / 2.0;
  return mask_jaccard(dilate(boundary_mask(truth), radius), dilate(boundary_mask(estimate), radius));
}

void write_overlap_csv(std::ostream& out, const std::vector<OverlapRow>& rows) {
  out << "instance_id,method,w,overlap_rate\n";
  for (const auto& r : rows)
    out << r.instance_id << ',' << r.method << ',' << r.w << ',' << std::setprecision(17) << r.overlap_rate << '\n';
}

std::vector<OverlapRow> read_overlap_csv(std::istream& in) {
  std::vector<OverlapRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty overlap CSV");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    OverlapRow r;
    std::string w, rate;
    if (!std::getline(ss, r.instance_id, ',') || !std::getline(ss, r.method, ',') || !std::getline(ss, w, ',') ||
        !std::getline(ss, rate))
      throw DataError("malformed overlap CSV line: " + line);
    try {
      r.w = std::stoi(w);
      r.overlap_rate = std::stod(rate);
    } catch (const std::exception&) {
      throw DataError("malformed overlap CSV line: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json overlap_summary(const std::vector<OverlapRow>& rows) {
  std::map<std::pair<std::string, int>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& a = acc[{r.method, r.w}];
    a.first += r.overlap_rate;
    ++a.second;
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, a] : acc)
    out.push_back({{"method", key.first}, {"w", key.second}, {"mean_overlap_rate", a.first / a.second}, {"count", a.second}});
  return out;
}

}  // namespace coreg
