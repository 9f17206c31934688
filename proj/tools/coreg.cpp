// coreg: synthetic data generation, joint registration/segmentation,
// boundary-overlap evaluation and overlay rendering.
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 data error,
// 4 replay produced different artifacts.

#include "coreg/config.hpp"
#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/io.hpp"
#include "coreg/register.hpp"
#include "coreg/synth.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace coreg;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitReplay = 4;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

/// Config file with optional "model" and "synth" sections; top-level keys
/// apply to both when a section is absent.
struct Settings {
  json raw = json::object();
  ModelConfig model;
  SynthConfig synth;
};

Settings load_settings(const std::string& path, const std::optional<std::uint64_t>& seed) {
  Settings s;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    try {
      s.raw = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!s.raw.is_object()) throw ConfigError(path + ": top level must be an object");
  }
  s.model = model_config_from_json(s.raw.contains("model") ? s.raw["model"] : s.raw);
  s.synth = synth_config_from_json(s.raw.contains("synth") ? s.raw["synth"] : s.raw);
  if (seed) {
    s.model.seed = *seed;
    s.synth.seed = *seed;
  }
  s.model.validate();
  s.synth.validate();
  return s;
}

/// Collects inputs and outputs of one run and writes manifest.json.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args, fs::path out_dir)
      : command_(std::move(command)), args_(std::move(args)), out_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const std::string& path) {
    inputs_.push_back({{"role", role}, {"path", absolute(path)}, {"sha256", sha256_file(path)}});
  }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }
  void set_config(json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void write() const {
    json outs = json::array();
    for (const auto& name : outputs_) outs.push_back({{"name", name}, {"sha256", sha256_file(out_ / name)}});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"tool", "coreg"},
              {"version", kVersion},
              {"command", command_},
              {"args", args_},
              {"config", config_},
              {"seed", seed_},
              {"out_dir", absolute(out_.string())},
              {"inputs", inputs_},
              {"outputs", outs},
              {"timing_seconds", seconds}};
    write_json(out_ / "manifest.json", m);
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  fs::path out_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<int> parse_w_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int w = std::stoi(item, &used);
      if (used != item.size() || w < 1) throw std::invalid_argument(item);
      out.push_back(w);
    } catch (const std::exception&) {
      throw ConfigError("--w expects a comma-separated list of integers >= 1, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("--w list is empty");
  return out;
}

LabelMap to_label_map(const Segmentation& seg) { return seg.label_map(); }

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* app, CommonOptions& o, bool with_seed = true) {
  app->add_option("--config", o.config, "JSON config file");
  if (with_seed) app->add_option("--seed", o.seed, "random seed (overrides the config)");
  app->add_option("--out", o.out, "output directory");
}

int cmd_synth(const CommonOptions& o, const std::vector<std::string>& args) {
  const Settings s = load_settings(o.config, o.seed);
  fs::create_directories(o.out);
  Manifest m("synth", args, o.out);
  if (!o.config.empty()) m.input("config", o.config);
  m.set_config({{"synth", to_json(s.synth)}, {"model", to_json(s.model)}});
  m.set_seed(s.synth.seed);

  const SynthInstance inst = generate_instance(s.synth, SymmetryGroup::cubic());
  write_label_png(m.output("truth_labels.png"), to_label_map(inst.truth));
  write_label_png(m.output("initial_labels.png"), to_label_map(inst.corruption.seg));
  write_label_png(m.output("grain_labels.png"), inst.corruption.grain_labels);
  write_field_raw(m.output("scalar.grf"), inst.images.scalar);
  write_field_raw(m.output("quat.grf"), inst.images.quat);
  write_json(m.output("truth.json"), sidecar_json(inst, s.synth));
  m.write();
  return 0;
}

struct RegisterOptions {
  std::string scalar, quat, labels, transform, mask1, mask2;
  std::string first = "quat";
  std::optional<int> iters;
};

AffineTransform read_transform(const std::string& path) {
  const json j = read_json(path);
  AffineTransform t;
  try {
    const auto& l = j.at("linear");
    t.linear << l.at(0).at(0).get<double>(), l.at(0).at(1).get<double>(), l.at(1).at(0).get<double>(),
        l.at(1).at(1).get<double>();
    t.translation << j.at("translation").at(0).get<double>(), j.at("translation").at(1).get<double>();
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!t.invertible()) throw DataError(path + ": transform is singular");
  return t;
}

BinaryMask mask_from_labels(const LabelMap& l) {
  BinaryMask m(l.width, l.height);
  for (std::size_t i = 0; i < l.size(); ++i) m.values[i] = l.labels[i] != 0;
  return m;
}

int cmd_register(const CommonOptions& o, const RegisterOptions& r, const std::vector<std::string>& args) {
  const Settings s = load_settings(o.config, o.seed);
  fs::create_directories(o.out);
  Manifest m("register", args, o.out);
  if (!o.config.empty()) m.input("config", o.config);
  const int iters = r.iters.value_or(s.model.iters);
  if (iters < 0) throw ConfigError("--iters must be non-negative");
  json cfg = to_json(s.model);
  cfg["iters"] = iters;
  cfg["first"] = r.first;
  m.set_config(cfg);
  m.set_seed(s.model.seed);

  m.input("scalar", r.scalar);
  m.input("quat", r.quat);
  m.input("labels", r.labels);
  const ScalarField scalar = read_scalar_field(r.scalar);
  const QuatField quat = read_quat_raw(r.quat);
  const Segmentation s1 = build_regions(read_label_map(r.labels));

  const bool quat_first = r.first == "quat";
  const ImageRef i1 = quat_first ? ImageRef(quat) : ImageRef(scalar);
  const ImageRef i2 = quat_first ? ImageRef(scalar) : ImageRef(quat);
  if (s1.width() != i1.width() || s1.height() != i1.height())
    throw DataError("initial labels do not match the first modality's image size");

  AffineTransform t;
  if (!r.transform.empty()) {
    m.input("transform", r.transform);
    t = read_transform(r.transform);
  } else if (!r.mask1.empty() && !r.mask2.empty()) {
    m.input("mask1", r.mask1);
    m.input("mask2", r.mask2);
    t = estimate_affine(mask_from_labels(read_label_map(r.mask1)), mask_from_labels(read_label_map(r.mask2)));
  } else if (i1.width() != i2.width() || i1.height() != i2.height()) {
    BinaryMask a(i1.width(), i1.height()), b(i2.width(), i2.height());
    std::fill(a.values.begin(), a.values.end(), 1);
    std::fill(b.values.begin(), b.values.end(), 1);
    t = estimate_affine(a, b);
  }

  const PipelineResult res = alternate_minimize(i1, i2, s1, t, SymmetryGroup::cubic(), s.model, iters);
  write_label_png(m.output("s1_labels.png"), to_label_map(res.s1));
  write_label_png(m.output("s2_labels.png"), to_label_map(res.s2));
  write_label_png(m.output("s2_initial_labels.png"), to_label_map(res.s2_initial));
  write_json(m.output("correspondence.json"), correspondence_json(res.corr));
  {
    std::ofstream out(m.output("trace.csv"));
    write_trace_csv(out, res.trace);
  }
  {
    std::ofstream out(m.output("splits.csv"));
    write_splits_csv(out, res.splits);
  }
  m.write();
  return 0;
}

struct EvalOptions {
  std::string truth, instance = "0", w = "1,2,3,4,5";
  std::vector<std::string> methods;
};

int cmd_eval(const CommonOptions& o, const EvalOptions& e, const std::vector<std::string>& args) {
  const std::vector<int> ws = parse_w_list(e.w);
  if (e.methods.empty()) throw ConfigError("eval needs at least one --method NAME=PATH");
  fs::create_directories(o.out);
  Manifest m("eval", args, o.out);
  m.set_config({{"w", ws}, {"instance", e.instance}});
  m.input("truth", e.truth);
  const Segmentation truth = build_regions(read_label_map(e.truth));
  std::vector<OverlapRow> rows;
  for (const auto& item : e.methods) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--method expects NAME=PATH, got '" + item + "'");
    const std::string name = item.substr(0, eq), path = item.substr(eq + 1);
    m.input(name, path);
    const Segmentation est = build_regions(read_label_map(path));
    for (int w : ws) rows.push_back({e.instance, name, w, overlapping_rate(truth, est, w)});
  }
  {
    std::ofstream out(m.output("overlap.csv"));
    write_overlap_csv(out, rows);
  }
  write_json(m.output("summary.json"), overlap_summary(rows));
  m.write();
  return 0;
}

struct RenderOptions {
  std::string image, initial, final_labels, correspondence, name = "overlay.png";
};

int cmd_render(const CommonOptions& o, const RenderOptions& r, const std::vector<std::string>& args) {
  fs::create_directories(o.out);
  Manifest m("render", args, o.out);
  m.input("image", r.image);
  m.input("initial", r.initial);
  m.input("final", r.final_labels);
  const ScalarField img = read_scalar_field(r.image);
  const LabelMap initial = read_label_map(r.initial);
  const LabelMap fin = read_label_map(r.final_labels);
  if (initial.width != img.width || initial.height != img.height || fin.width != img.width ||
      fin.height != img.height)
    throw DataError("image and label maps differ in size");

  // Root region of every final label: the initial region it descends from.
  std::map<std::int32_t, std::int32_t> parent;
  if (!r.correspondence.empty()) {
    m.input("correspondence", r.correspondence);
    const json c = read_json(r.correspondence);
    for (const auto& s : c.at("split_log"))
      if (s.at("modality").get<int>() == 2) parent[s.at("added").get<std::int32_t>()] = s.at("parent").get<std::int32_t>();
  }
  auto root = [&](std::int32_t l) {
    for (auto it = parent.find(l); it != parent.end(); it = parent.find(l)) l = it->second;
    return l;
  };

  const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
  const double span = *hi > *lo ? *hi - *lo : 1.0;
  const int w = img.width, h = img.height;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * (img.values[i] - *lo) / span));
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g;
  }
  auto differs = [&](const LabelMap& l, int x, int y, auto pred) {
    const std::int32_t a = l.at(x, y);
    const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k)
      if (nx[k] >= 0 && ny[k] >= 0 && nx[k] < w && ny[k] < h && l.at(nx[k], ny[k]) != a && pred(a, l.at(nx[k], ny[k])))
        return true;
    return false;
  };
  auto paint = [&](int x, int y, std::uint8_t cr, std::uint8_t cg, std::uint8_t cb) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * w + x);
    rgb[i] = cr;
    rgb[i + 1] = cg;
    rgb[i + 2] = cb;
  };
  auto any = [](std::int32_t, std::int32_t) { return true; };
  auto across_roots = [&](std::int32_t a, std::int32_t b) { return root(a) != root(b); };
  auto within_root = [&](std::int32_t a, std::int32_t b) { return root(a) == root(b); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (differs(initial, x, y, any)) paint(x, y, 255, 0, 0);
      if (differs(fin, x, y, across_roots)) paint(x, y, 0, 0, 255);
      if (differs(fin, x, y, within_root)) paint(x, y, 0, 200, 0);
    }
  write_rgb_png(m.output(r.name), w, h, rgb);
  m.write();
  return 0;
}

int run(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  const json man = read_json(manifest_path);
  std::vector<std::string> args;
  std::string out_dir;
  try {
    args = man.at("args").get<std::vector<std::string>>();
    out_dir = man.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": " + e.what());
  }
  for (const auto& in : man.at("inputs")) {
    const std::string path = in.at("path").get<std::string>();
    if (sha256_file(path) != in.at("sha256").get<std::string>())
      throw DataError("input changed since the recorded run: " + path);
  }
  const std::string target = out_override.empty() ? out_dir : absolute(out_override);
  bool replaced = false;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--out") {
      args[i + 1] = target;
      replaced = true;
    }
  if (!replaced) {
    args.push_back("--out");
    args.push_back(target);
  }
  const int status = run(args);
  if (status != 0) return status;

  int mismatches = 0;
  for (const auto& o : man.at("outputs")) {
    const std::string name = o.at("name").get<std::string>();
    const bool same = sha256_file(fs::path(target) / name) == o.at("sha256").get<std::string>();
    std::cout << (same ? "identical " : "DIFFERENT ") << name << '\n';
    mismatches += !same;
  }
  return mismatches == 0 ? 0 : kExitReplay;
}

// Makes path-valued arguments absolute so a manifest can be replayed from anywhere.
std::vector<std::string> normalized_args(const std::vector<std::string>& args) {
  static const std::vector<std::string> path_flags = {"--config", "--out",    "--scalar", "--quat",
                                                      "--labels", "--transform", "--mask1", "--mask2",
                                                      "--truth",  "--image",  "--initial", "--final",
                                                      "--correspondence", "--manifest"};
  std::vector<std::string> out = args;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (std::find(path_flags.begin(), path_flags.end(), out[i]) != path_flags.end()) {
      out[i + 1] = absolute(out[i + 1]);
    } else if (out[i] == "--method") {
      const auto eq = out[i + 1].find('=');
      if (eq != std::string::npos) out[i + 1] = out[i + 1].substr(0, eq + 1) + absolute(out[i + 1].substr(eq + 1));
    }
  }
  return out;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Joint region-level registration and segmentation of two image modalities"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOptions common;
  RegisterOptions reg;
  EvalOptions ev;
  RenderOptions ren;
  std::string manifest, replay_out;

  auto* synth = app.add_subcommand("synth", "generate a synthetic instance");
  add_common(synth, common);

  auto* regc = app.add_subcommand("register", "run alternating registration/segmentation");
  add_common(regc, common);
  regc->add_option("--scalar", reg.scalar, "scalar image (.grf or grayscale .png)")->required();
  regc->add_option("--quat", reg.quat, "orientation image (.grf, 4 channels)")->required();
  regc->add_option("--labels", reg.labels, "initial segmentation of the first modality")->required();
  regc->add_option("--first", reg.first, "modality segmented initially")->check(CLI::IsMember({"quat", "scalar"}));
  regc->add_option("--iters", reg.iters, "alternating iterations (default 3)");
  regc->add_option("--transform", reg.transform, "affine transform JSON");
  regc->add_option("--mask1", reg.mask1, "foreground mask of the first modality");
  regc->add_option("--mask2", reg.mask2, "foreground mask of the second modality");

  auto* evc = app.add_subcommand("eval", "boundary overlapping rate against ground truth");
  add_common(evc, common, false);
  evc->add_option("--truth", ev.truth, "ground-truth label map")->required();
  evc->add_option("--method", ev.methods, "NAME=PATH of an estimated label map (repeatable)");
  evc->add_option("--w", ev.w, "boundary widths, comma separated");
  evc->add_option("--instance", ev.instance, "instance id written to the CSV");

  auto* renc = app.add_subcommand("render", "boundary overlay PNG");
  add_common(renc, common, false);
  renc->add_option("--image", ren.image, "scalar image")->required();
  renc->add_option("--initial", ren.initial, "initial label map (red)")->required();
  renc->add_option("--final", ren.final_labels, "final label map (blue, green for detected boundaries)")->required();
  renc->add_option("--correspondence", ren.correspondence, "correspondence JSON with the split log");
  renc->add_option("--name", ren.name, "output file name");

  auto* rep = app.add_subcommand("replay", "re-run a recorded manifest and compare artifacts");
  rep->add_option("--manifest", manifest, "manifest.json of an earlier run")->required();
  rep->add_option("--out", replay_out, "output directory (default: the recorded one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::vector<std::string> recorded = normalized_args(args);
  if (synth->parsed()) return cmd_synth(common, recorded);
  if (regc->parsed()) return cmd_register(common, reg, recorded);
  if (evc->parsed()) return cmd_eval(common, ev, recorded);
  if (renc->parsed()) return cmd_render(common, ren, recorded);
  return cmd_replay(manifest, replay_out);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const coreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const coreg::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
