#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace coreg;
namespace fs = std::filesystem;

namespace {

Segmentation vertical_edge(int w, int h, int edge) {
  LabelMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = x < edge ? 0 : 1;
  return build_regions(m);
}

// Pixels within distance w/2 of a boundary pixel, by checking every pair.
std::set<int> dilated_set(const Segmentation& s, int w) {
  std::vector<int> boundary;
  for (int p = 0; p < static_cast<int>(s.pixel_count()); ++p) {
    const int x = p % s.width(), y = p / s.width();
    bool b = false;
    if (x > 0 && s.label(p - 1) != s.label(p)) b = true;
    if (x + 1 < s.width() && s.label(p + 1) != s.label(p)) b = true;
    if (y > 0 && s.label(p - s.width()) != s.label(p)) b = true;
    if (y + 1 < s.height() && s.label(p + s.width()) != s.label(p)) b = true;
    if (b) boundary.push_back(p);
  }
  std::set<int> out;
  const double r2 = (w / 2.0) * (w / 2.0);
  for (int p = 0; p < static_cast<int>(s.pixel_count()); ++p)
    for (int q : boundary) {
      const double dx = p % s.width() - q % s.width(), dy = p / s.width() - q / s.width();
      if (dx * dx + dy * dy <= r2) {
        out.insert(p);
        break;
      }
    }
  return out;
}

double set_jaccard(const std::set<int>& a, const std::set<int>& b) {
  std::size_t inter = 0;
  for (int v : a) inter += b.count(v);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("coreg_eval_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("disk offsets") {
  CHECK(disk_offsets(0.5).size() == 1);
  CHECK(disk_offsets(1.0).size() == 5);
  CHECK(disk_offsets(1.5).size() == 9);
  CHECK(disk_offsets(2.0).size() == 13);
}

TEST_CASE("boundary mask of a vertical edge") {
  const auto s = vertical_edge(8, 4, 3);
  const auto m = boundary_mask(s);
  CHECK(m.count() == 8);
  for (int y = 0; y < 4; ++y) {
    CHECK(m.at(2, y) == 1);
    CHECK(m.at(3, y) == 1);
  }
}

TEST_CASE("identical segmentations overlap fully") {
  Rng rng(1);
  const auto s = build_regions(oracle::voronoi(48, 48, 7, rng));
  for (int w = 1; w <= 5; ++w) CHECK(overlapping_rate(s, s, w) == 1.0);
}

TEST_CASE("distant boundaries do not overlap") {
  const auto a = vertical_edge(64, 16, 10), b = vertical_edge(64, 16, 40);
  for (int w = 1; w <= 5; ++w) CHECK(overlapping_rate(a, b, w) == 0.0);
}

TEST_CASE("offset edge against the set oracle") {
  const auto truth = vertical_edge(32, 24, 14), est = vertical_edge(32, 24, 16);
  const double o4 = overlapping_rate(truth, est, 4);
  CHECK(o4 == set_jaccard(dilated_set(truth, 4), dilated_set(est, 4)));
  double prev = 0;
  for (int w = 1; w <= 8; ++w) {
    const double o = overlapping_rate(truth, est, w);
    CHECK(o >= prev);
    prev = o;
  }
}

TEST_CASE("overlap on random tessellations") {
  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    const auto a = build_regions(oracle::voronoi(40, 40, 6, rng));
    const auto b = build_regions(oracle::voronoi(40, 40, 6, rng));
    for (int w : {1, 3, 5}) {
      const double o = overlapping_rate(a, b, w);
      CHECK(o == overlapping_rate(b, a, w));
      CHECK(o == doctest::Approx(set_jaccard(dilated_set(a, w), dilated_set(b, w))).epsilon(1e-15));
      CHECK((o >= 0.0 && o <= 1.0));
    }
  }
}

TEST_CASE("overlap argument checks") {
  const auto a = vertical_edge(8, 8, 4), b = vertical_edge(9, 8, 4);
  CHECK_THROWS_AS(overlapping_rate(a, a, 0), DomainError);
  CHECK_THROWS_AS(overlapping_rate(a, b, 1), DimensionError);
  CHECK(mask_jaccard(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
}

TEST_CASE("overlap csv round trip and summary") {
  std::vector<OverlapRow> rows;
  for (int w = 1; w <= 5; ++w) {
    rows.push_back({"i0", "baseline", w, 0.1 * w});
    rows.push_back({"i0", "coreg", w, 0.15 * w});
    rows.push_back({"i1", "coreg", w, 0.05 * w});
  }
  std::stringstream ss;
  write_overlap_csv(ss, rows);
  CHECK(ss.str().rfind("instance_id,method,w,overlap_rate\n", 0) == 0);
  const auto back = read_overlap_csv(ss);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].instance_id == rows[i].instance_id);
    CHECK(back[i].method == rows[i].method);
    CHECK(back[i].w == rows[i].w);
    CHECK(back[i].overlap_rate == rows[i].overlap_rate);
  }
  const auto j = overlap_summary(rows);
  CHECK(j.dump().find("coreg") != std::string::npos);
  std::stringstream bad("instance_id,method,w,overlap_rate\ni0,x,notanumber,0.1\n");
  CHECK_THROWS_AS(read_overlap_csv(bad), DataError);
}

TEST_CASE("label rasters round trip through png and csv") {
  TempDir dir;
  Rng rng(3);
  LabelMap m = oracle::voronoi(37, 23, 9, rng);
  m.at(0, 0) = 65535;
  write_label_png(dir.path / "l.png", m);
  const auto p = read_label_png(dir.path / "l.png");
  CHECK(p.width == 37);
  CHECK(p.height == 23);
  CHECK(p.labels == m.labels);
  write_label_csv(dir.path / "l.csv", m);
  CHECK(read_label_csv(dir.path / "l.csv").labels == m.labels);
  CHECK(read_label_map(dir.path / "l.csv").labels == m.labels);
  CHECK(read_label_map(dir.path / "l.png").labels == m.labels);
  m.at(1, 0) = 70000;
  CHECK_THROWS_AS(write_label_png(dir.path / "bad.png", m), DataError);
  CHECK_THROWS_AS(read_label_map(dir.path / "l.txt"), DataError);
  CHECK_THROWS_AS(read_label_png(dir.path / "missing.png"), DataError);
  std::ofstream(dir.path / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_label_png(dir.path / "junk.png"), DataError);
}

TEST_CASE("raw fields round trip") {
  TempDir dir;
  Rng rng(4);
  ScalarField f(13, 7);
  for (auto& v : f.values) v = rng.normal(100, 20);
  write_field_raw(dir.path / "s.grf", f);
  const auto g = read_scalar_raw(dir.path / "s.grf");
  REQUIRE(g.values.size() == f.values.size());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(g.values[i] == static_cast<double>(static_cast<float>(f.values[i])));
  CHECK(read_scalar_field(dir.path / "s.grf").values == g.values);

  QuatField q(5, 4);
  for (auto& v : q.values) v = oracle::random_quat(rng);
  write_field_raw(dir.path / "q.grf", q);
  const auto r = read_quat_raw(dir.path / "q.grf");
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(std::abs(r.values[i].norm() - 1.0) < 1e-12);
    CHECK((r.values[i] - q.values[i]).norm() < 1e-6);
  }
  CHECK_THROWS_AS(read_quat_raw(dir.path / "s.grf"), DataError);
  CHECK_THROWS_AS(read_scalar_raw(dir.path / "q.grf"), DataError);
  {
    std::ofstream out(dir.path / "short.grf", std::ios::binary);
    out << "GRF1";
  }
  CHECK_THROWS_AS(read_scalar_raw(dir.path / "short.grf"), DataError);
}

TEST_CASE("trace csv round trip") {
  EnergyTrace t{{0, Modality::second, 1.5, 2.25, 0, 3.75}, {1, Modality::second, 1.5, 2.0, 1, 3.65}};
  std::stringstream ss;
  write_trace_csv(ss, t);
  CHECK(ss.str().rfind("half_iteration,modality,J1,J2,D,U\n", 0) == 0);
  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].half_iteration == 1);
  CHECK(back[1].d == 1);
  CHECK(back[1].u == 3.65);
  CHECK(back[0].j2 == 2.25);
}

TEST_CASE("correspondence and json files") {
  TempDir dir;
  auto s1 = build_regions(LabelMap(4, 4));
  auto s2 = s1;
  auto corr = CorrespondenceMap::bijection(s1);
  Partition psi;
  for (PixelIndex p : s2.region(0).pixels) (p % 4 < 2 ? psi.plus : psi.minus).push_back(p);
  split_region_in_place(s2, corr, Modality::second, 0, psi);
  const auto j = correspondence_json(corr);
  CHECK(j["inter_modal_energy"] == 1);
  CHECK(j["split_log"].size() == 1);
  CHECK(j["split_log"][0]["added_pixels"] == 8);
  CHECK(j["links"].size() == 2);
  write_json(dir.path / "c.json", j);
  CHECK(read_json(dir.path / "c.json") == j);
  std::ofstream(dir.path / "bad.json") << "{";
  CHECK_THROWS_AS(read_json(dir.path / "bad.json"), DataError);
}
