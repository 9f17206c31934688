#include "coreg/io.hpp"

#include "coreg/error.hpp"

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace coreg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

thread_local std::string png_message;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  png_message = msg;
  png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

// Writes rows of `bytes_per_row` bytes; libpng expects big-endian 16-bit samples.
void write_png(const fs::path& path, int width, int height, int bit_depth, int color_type,
               const std::vector<std::uint8_t>& data, std::size_t bytes_per_row) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw DataError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png: cannot create info");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: " + png_message);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * bytes_per_row));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> values;
  int bit_depth = 8;
};

GrayImage read_gray_png(const fs::path& path) {
  File f = open_file(path, "rb");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), f.get()) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()))
    throw DataError(path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw DataError("png: cannot create reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png: cannot create info");
  }
  GrayImage img;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": " + png_message);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, static_cast<int>(sig.size()));
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const bool supported = color == PNG_COLOR_TYPE_GRAY && (img.bit_depth == 8 || img.bit_depth == 16) &&
                         png_get_interlace_type(png, info) == PNG_INTERLACE_NONE;
  if (!supported) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": expected a non-interlaced 8- or 16-bit grayscale PNG");
  }
  row.resize(png_get_rowbytes(png, info));
  img.values.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      img.values[i] = img.bit_depth == 16 ? (std::uint32_t{row[2 * x]} << 8) | row[2 * x + 1] : row[x];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return b[0] | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

void put_f32(std::ostream& out, double v) {
  const auto f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

struct RawHeader {
  std::uint32_t width, height, channels;
};

RawHeader read_raw_header(std::istream& in, const fs::path& path) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::string(magic.data(), 4) != "GRF1") throw DataError(path.string() + ": missing GRF1 header");
  RawHeader h{get_u32(in), get_u32(in), get_u32(in)};
  if (!in || h.width == 0 || h.height == 0) throw DataError(path.string() + ": bad GRF1 dimensions");
  return h;
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

}  // namespace

void write_label_png(const fs::path& path, const LabelMap& labels) {
  std::vector<std::uint8_t> data(labels.size() * 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels.labels[i];
    if (l < 0 || l > 65535) throw DataError("label " + std::to_string(l) + " does not fit a 16-bit PNG");
    data[2 * i] = static_cast<std::uint8_t>(l >> 8);
    data[2 * i + 1] = static_cast<std::uint8_t>(l & 0xff);
  }
  write_png(path, labels.width, labels.height, 16, PNG_COLOR_TYPE_GRAY, data, static_cast<std::size_t>(labels.width) * 2);
}

LabelMap read_label_png(const fs::path& path) {
  const GrayImage img = read_gray_png(path);
  LabelMap out(img.width, img.height);
  for (std::size_t i = 0; i < img.values.size(); ++i) out.labels[i] = static_cast<std::int32_t>(img.values[i]);
  return out;
}

void write_label_csv(const fs::path& path, const LabelMap& labels) {
  std::ofstream out = open_out(path, false);
  out << "x,y,label\n";
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) out << x << ',' << y << ',' << labels.at(x, y) << '\n';
}

LabelMap read_label_csv(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  std::string line;
  std::getline(in, line);
  std::vector<std::array<long, 3>> rows;
  long w = 0, h = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<long, 3> r{};
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    if (!(ss >> r[0] >> c1 >> r[1] >> c2 >> r[2]) || c1 != ',' || c2 != ',' || r[0] < 0 || r[1] < 0)
      throw DataError(path.string() + ": malformed line '" + line + "'");
    w = std::max(w, r[0] + 1);
    h = std::max(h, r[1] + 1);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError(path.string() + ": no label rows");
  if (static_cast<std::size_t>(w * h) != rows.size())
    throw DataError(path.string() + ": rows do not cover a full " + std::to_string(w) + "x" + std::to_string(h) + " grid");
  LabelMap out(static_cast<int>(w), static_cast<int>(h), -1);
  for (const auto& r : rows) {
    auto& l = out.at(static_cast<int>(r[0]), static_cast<int>(r[1]));
    if (l != -1) throw DataError(path.string() + ": duplicate pixel");
    l = static_cast<std::int32_t>(r[2]);
  }
  return out;
}

LabelMap read_label_map(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_label_png(path);
  if (ext == ".csv") return read_label_csv(path);
  throw DataError(path.string() + ": label maps must be .png or .csv");
}

void write_field_raw(const fs::path& path, const ScalarField& field) {
  std::ofstream out = open_out(path, true);
  out.write("GRF1", 4);
  put_u32(out, static_cast<std::uint32_t>(field.width));
  put_u32(out, static_cast<std::uint32_t>(field.height));
  put_u32(out, 1);
  for (double v : field.values) put_f32(out, v);
}

void write_field_raw(const fs::path& path, const QuatField& field) {
  std::ofstream out = open_out(path, true);
  out.write("GRF1", 4);
  put_u32(out, static_cast<std::uint32_t>(field.width));
  put_u32(out, static_cast<std::uint32_t>(field.height));
  put_u32(out, 4);
  for (const Quat& q : field.values)
    for (int c = 0; c < 4; ++c) put_f32(out, q(c));
}

ScalarField read_scalar_raw(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  const RawHeader h = read_raw_header(in, path);
  if (h.channels != 1) throw DataError(path.string() + ": expected 1 channel");
  ScalarField out(static_cast<int>(h.width), static_cast<int>(h.height));
  for (double& v : out.values) v = get_f32(in);
  if (!in) throw DataError(path.string() + ": truncated");
  out.validate();
  return out;
}

QuatField read_quat_raw(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  const RawHeader h = read_raw_header(in, path);
  if (h.channels != 4) throw DataError(path.string() + ": expected 4 channels");
  QuatField out(static_cast<int>(h.width), static_cast<int>(h.height));
  for (Quat& q : out.values) {
    for (int c = 0; c < 4; ++c) q(c) = get_f32(in);
    const double n = q.norm();
    if (!(std::abs(n - 1.0) < 1e-3)) throw DataError(path.string() + ": quaternion far from unit norm");
    q /= n;
  }
  if (!in) throw DataError(path.string() + ": truncated");
  return out;
}

ScalarField read_scalar_field(const fs::path& path) {
  if (path.extension() == ".png") {
    const GrayImage img = read_gray_png(path);
    ScalarField out(img.width, img.height);
    for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = img.values[i];
    return out;
  }
  return read_scalar_raw(path);
}

void write_rgb_png(const fs::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw DimensionError("rgb buffer size mismatch");
  write_png(path, width, height, 8, PNG_COLOR_TYPE_RGB, rgb, static_cast<std::size_t>(width) * 3);
}

void write_trace_csv(std::ostream& out, const EnergyTrace& trace) {
  out << "half_iteration,modality,J1,J2,D,U\n" << std::setprecision(17);
  for (const auto& r : trace)
    out << r.half_iteration << ',' << static_cast<int>(r.updated) << ',' << r.j1 << ',' << r.j2 << ',' << r.d << ','
        << r.u << '\n';
}

EnergyTrace read_trace_csv(std::istream& in) {
  EnergyTrace trace;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ss(line);
    EnergyRecord r;
    int m = 0;
    if (!(ss >> r.half_iteration >> m >> r.j1 >> r.j2 >> r.d >> r.u)) throw DataError("malformed trace line");
    r.updated = static_cast<Modality>(m);
    trace.push_back(r);
  }
  return trace;
}

void write_splits_csv(std::ostream& out, const std::vector<SplitEvent>& splits) {
  out << "half_iteration,modality,parent,child,log_glr,size_ratio,threshold_eta,delta_u\n" << std::setprecision(17);
  for (const auto& s : splits)
    out << s.half_iteration << ',' << static_cast<int>(s.modality) << ',' << s.parent << ',' << s.child << ','
        << s.log_glr << ',' << s.size_ratio << ',' << s.threshold_eta << ',' << s.delta_u << '\n';
}

nlohmann::json correspondence_json(const CorrespondenceMap& corr) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& [a, b] : corr.links()) links.push_back({a, b});
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : corr.split_log())
    log.push_back({{"modality", static_cast<int>(s.modality)},
                   {"parent", s.parent},
                   {"kept", s.kept},
                   {"added", s.added},
                   {"kept_pixels", s.kept_pixels.size()},
                   {"added_pixels", s.added_pixels.size()}});
  const auto& t = corr.transform();
  return {{"links", links},
          {"split_log", log},
          {"transform",
           {{"linear", {{t.linear(0, 0), t.linear(0, 1)}, {t.linear(1, 0), t.linear(1, 1)}}},
            {"translation", {t.translation(0), t.translation(1)}}}},
          {"inter_modal_energy", inter_modal_energy(corr)}};
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out = open_out(path, false);
  out << j.dump(2) << '\n';
}

}  // namespace coreg
