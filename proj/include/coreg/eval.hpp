#pragma once

#include "coreg/fields.hpp"
#include "coreg/segmentation.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace coreg {

/// Pixels with a 4-neighbour of a different label.
BinaryMask boundary_mask(const Segmentation& seg);

/// Offsets (dx, dy) with dx^2 + dy^2 <= radius^2, row-major.
std::vector<std::pair<int, int>> disk_offsets(double radius);

/// Binary dilation by a disk of the given radius. Rows are processed in parallel.
BinaryMask dilate(const BinaryMask& mask, double radius);
/// Same result, single-threaded.
BinaryMask dilate_serial(const BinaryMask& mask, double radius);

/// |a & b| / |a | b|; 1 when both are empty. Throws DimensionError on a size mismatch.
double mask_jaccard(const BinaryMask& a, const BinaryMask& b);

/// Overlapping rate O(w): Jaccard ratio of the two boundary masks, each
/// dilated by a disk of radius w/2. Throws DomainError for w < 1 and
/// DimensionError when the grids differ.
double overlapping_rate(const Segmentation& truth, const Segmentation& estimate, int w);

struct OverlapRow {
  std::string instance_id;
  std::string method;
  int w = 0;
  double overlap_rate = 0.0;
};

/// Header "instance_id,method,w,overlap_rate" followed by one line per row.
void write_overlap_csv(std::ostream& out, const std::vector<OverlapRow>& rows);
std::vector<OverlapRow> read_overlap_csv(std::istream& in);

/// Mean and count of overlap_rate per (method, w).
nlohmann::json overlap_summary(const std::vector<OverlapRow>& rows);

}  // namespace coreg
