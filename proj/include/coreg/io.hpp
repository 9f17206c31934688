#pragma once

#include "coreg/correspondence.hpp"
#include "coreg/fields.hpp"
#include "coreg/register.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

namespace coreg {

namespace fs = std::filesystem;

// All readers throw DataError on malformed or unreadable input.

/// 16-bit grayscale PNG, pixel value = label. Labels must lie in [0, 65535].
void write_label_png(const fs::path& path, const LabelMap& labels);
/// 8- or 16-bit grayscale PNG.
LabelMap read_label_png(const fs::path& path);

/// "x,y,label" rows after a header line.
void write_label_csv(const fs::path& path, const LabelMap& labels);
LabelMap read_label_csv(const fs::path& path);

/// Dispatches on the extension (.png or .csv).
LabelMap read_label_map(const fs::path& path);

/// Raw float32 field: "GRF1", u32 width, u32 height, u32 channels (little
/// endian), then width*height*channels floats in row-major pixel order.
void write_field_raw(const fs::path& path, const ScalarField& field);
void write_field_raw(const fs::path& path, const QuatField& field);
ScalarField read_scalar_raw(const fs::path& path);
/// Quaternions are renormalized after the float32 round trip.
QuatField read_quat_raw(const fs::path& path);

/// Scalar field from a .grf file or an 8/16-bit grayscale PNG.
ScalarField read_scalar_field(const fs::path& path);

/// 8-bit RGB PNG, rgb.size() == 3 * width * height.
void write_rgb_png(const fs::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

/// Header "half_iteration,modality,J1,J2,D,U".
void write_trace_csv(std::ostream& out, const EnergyTrace& trace);
EnergyTrace read_trace_csv(std::istream& in);

/// Header "half_iteration,modality,parent,child,log_glr,size_ratio,threshold_eta,delta_u".
void write_splits_csv(std::ostream& out, const std::vector<SplitEvent>& splits);

/// Links, split log (child sizes rather than pixel lists) and the affine transform.
nlohmann::json correspondence_json(const CorrespondenceMap& corr);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace coreg
