// Command-line front end: tfce, cluster, infer, compare, bench.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "etfce/bench.hpp"
#include "etfce/enhance.hpp"
#include "etfce/formats.hpp"
#include "etfce/forest.hpp"
#include "etfce/inference.hpp"
#include "etfce/nifti.hpp"
#include "etfce/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : etfce::Error {
  using Error::Error;
};

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

int default_workers() {
  if (const char* env = std::getenv("ETFCE_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return 1;
}

/// Connectivity from --conn; empty means 26 for volumes and 8 for single slices.
etfce::Connectivity connectivity_arg(const std::string& text, bool flat = false) {
  if (text.empty()) return flat ? etfce::Connectivity::k2D8 : etfce::Connectivity::k3D26;
  try {
    return etfce::parse_connectivity(text);
  } catch (const etfce::StructuralError& e) {
    throw UsageError(e.what());
  }
}

/// Mask from a file (nonzero = in), or from voxels that are finite and
/// nonzero in every frame of `data`.
std::shared_ptr<const etfce::Mask> load_mask(const std::optional<std::string>& path,
                                             const etfce::nifti::NiftiVolume& data) {
  const auto shape = data.shape();
  std::vector<std::uint8_t> in(static_cast<std::size_t>(shape.voxel_count()), 1);
  if (path) {
    const auto m = etfce::nifti::read_nifti(*path);
    if (m.voxels_per_frame() != shape.voxel_count() || m.nx() != shape.nx() || m.ny() != shape.ny())
      throw etfce::StructuralError(*path + ": mask grid does not match the data grid");
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = m.data[i] != 0.0 && std::isfinite(m.data[i]);
  } else {
    const std::size_t frame = in.size();
    for (std::int64_t t = 0; t < data.nt(); ++t)
      for (std::size_t i = 0; i < frame; ++i) {
        const double x = data.data[t * frame + i];
        if (!std::isfinite(x) || x == 0.0) in[i] = 0;
      }
  }
  return std::make_shared<const etfce::Mask>(shape, std::move(in));
}

etfce::nifti::NiftiVolume read_single_map(const std::string& path) {
  auto vol = etfce::nifti::read_nifti(path);
  if (vol.nt() != 1) throw etfce::StructuralError(path + ": expected a single 3D map, found " +
                                                  std::to_string(vol.nt()) + " frames");
  return vol;
}

void write_map(const std::string& path, const etfce::Mask& mask, std::span<const double> values,
               const etfce::nifti::Header& like, double fill = 0.0) {
  etfce::nifti::write_nifti(etfce::nifti::volume_from_dense(mask, values, fill, &like), path);
}

// ---------------------------------------------------------------- tfce

struct TfceArgs {
  std::string in, out;
  std::optional<std::string> mask;
  std::string conn;
  etfce::EnhanceParams params;
  int discretized = 0;
};

int cmd_tfce(const TfceArgs& a) {
  const auto vol = read_single_map(a.in);
  const auto conn = connectivity_arg(a.conn, vol.nz() == 1);
  const auto mask = load_mask(a.mask, vol);
  const etfce::StatisticMap map(mask, etfce::nifti::dense_from_volume(vol, *mask));
  a.params.validate();
  const etfce::Adjacency adjacency(*mask, conn);
  const auto scores = a.discretized > 0
                          ? etfce::discretized_tfce(map, adjacency, a.params, {a.discretized})
                          : etfce::exact_tfce(map, adjacency, a.params);
  write_map(a.out, *mask, scores.scores, vol.header);
  return 0;
}

// ---------------------------------------------------------------- cluster

struct ClusterArgs {
  std::string in, out;
  std::optional<std::string> mask;
  std::string conn;
  double cdt = 3.1;
  std::string mass = "raw";
};

int cmd_cluster(const ClusterArgs& a) {
  const auto vol = read_single_map(a.in);
  const auto conn = connectivity_arg(a.conn, vol.nz() == 1);
  if (!(a.cdt > 0.0)) throw UsageError("--cdt must be positive");
  const auto convention = a.mass == "excess" ? etfce::MassConvention::excess : etfce::MassConvention::raw;
  const auto mask = load_mask(a.mask, vol);
  const etfce::StatisticMap map(mask, etfce::nifti::dense_from_volume(vol, *mask));
  const auto forest = etfce::build_forest(etfce::rank_order(map, 0.0), *mask, conn);
  const auto table = etfce::clusters_at_threshold(forest, a.cdt, convention);
  json out = etfce::formats::cluster_table_json(table, *mask);
  out["connectivity"] = etfce::to_string(conn);
  out["mass_convention"] = a.mass;
  std::ofstream(a.out) << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::optional<std::string> in, list, mask, perm_matrix, labels, replay;
  std::string out = "etfce_out";
  std::string conn;
  etfce::EnhanceParams params;
  std::int64_t n_perm = 5000;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  std::string design = "one-sample";
  std::string tails = "positive";
  bool no_tfce = false;
  bool extent = false;
  bool mass = false;
  double cdt = 3.1;
  std::string mass_convention = "raw";
  int discretized = 0;
  int workers = 1;
};

json infer_config_json(const InferArgs& a) {
  auto path = [](const std::optional<std::string>& s) { return s ? json(fs::absolute(*s).string()) : json(nullptr); };
  json labels = nullptr;
  if (a.labels) labels = fs::exists(*a.labels) ? fs::absolute(*a.labels).string() : *a.labels;
  return {{"in", path(a.in)},
          {"list", path(a.list)},
          {"mask", path(a.mask)},
          {"perm_matrix", path(a.perm_matrix)},
          {"labels", labels},
          {"connectivity", a.conn},
          {"E", a.params.E},
          {"H", a.params.H},
          {"h0", a.params.h0},
          {"n_perm", a.n_perm},
          {"seed", a.seed},
          {"exhaustive", a.exhaustive},
          {"design", a.design},
          {"tails", a.tails},
          {"tfce", !a.no_tfce},
          {"cluster_extent", a.extent},
          {"cluster_mass", a.mass},
          {"cdt", a.cdt},
          {"mass_convention", a.mass_convention},
          {"discretized", a.discretized}};
}

void apply_config_json(const json& c, InferArgs& a) {
  auto opt = [&](const char* key, std::optional<std::string>& dst) {
    if (c.contains(key) && !c[key].is_null()) dst = c[key].get<std::string>();
  };
  opt("in", a.in);
  opt("list", a.list);
  opt("mask", a.mask);
  opt("perm_matrix", a.perm_matrix);
  opt("labels", a.labels);
  a.conn = c.at("connectivity").get<std::string>();
  a.params.E = c.at("E").get<double>();
  a.params.H = c.at("H").get<double>();
  a.params.h0 = c.at("h0").get<double>();
  a.n_perm = c.at("n_perm").get<std::int64_t>();
  a.seed = c.at("seed").get<std::uint64_t>();
  a.exhaustive = c.at("exhaustive").get<bool>();
  a.design = c.at("design").get<std::string>();
  a.tails = c.at("tails").get<std::string>();
  a.no_tfce = !c.at("tfce").get<bool>();
  a.extent = c.at("cluster_extent").get<bool>();
  a.mass = c.at("cluster_mass").get<bool>();
  a.cdt = c.at("cdt").get<double>();
  a.mass_convention = c.at("mass_convention").get<std::string>();
  a.discretized = c.at("discretized").get<int>();
}

std::vector<std::uint8_t> parse_labels(const std::string& text, int n_subjects) {
  std::string spec = text;
  if (fs::exists(text)) {
    std::ifstream in(text);
    spec.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::vector<std::uint8_t> labels;
  for (char ch : spec) {
    if (ch == '0' || ch == '1') labels.push_back(static_cast<std::uint8_t>(ch - '0'));
    else if (ch != ',' && !std::isspace(static_cast<unsigned char>(ch)))
      throw UsageError("--labels accepts only 0/1 entries");
  }
  if (static_cast<int>(labels.size()) != n_subjects)
    throw UsageError("--labels has " + std::to_string(labels.size()) + " entries for " +
                     std::to_string(n_subjects) + " subjects");
  return labels;
}

/// 4D volume whose frames are the subjects, from --in or a --list of 3D maps.
etfce::nifti::NiftiVolume load_subjects(const InferArgs& a) {
  if (a.in) return etfce::nifti::read_nifti(*a.in);
  std::ifstream in(*a.list);
  if (!in) throw etfce::IoError(*a.list + ": cannot open for reading");
  const fs::path base = fs::path(*a.list).parent_path();
  etfce::nifti::NiftiVolume stack;
  std::string line;
  int frames = 0;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(b, e - b + 1);
    if (p.is_relative()) p = base / p;
    const auto vol = read_single_map(p.string());
    if (frames == 0) {
      stack.header = vol.header;
    } else if (vol.voxels_per_frame() != stack.voxels_per_frame() || vol.nx() != stack.nx() ||
               vol.ny() != stack.ny()) {
      throw etfce::StructuralError(p.string() + ": grid differs from the first subject map");
    }
    stack.data.insert(stack.data.end(), vol.data.begin(), vol.data.end());
    ++frames;
  }
  if (frames == 0) throw etfce::StructuralError(*a.list + ": no subject maps listed");
  if (frames > 32767) throw etfce::StructuralError(*a.list + ": too many subject maps");
  stack.header.dim = {4, static_cast<std::int16_t>(stack.nx()), static_cast<std::int16_t>(stack.ny()),
                      static_cast<std::int16_t>(stack.nz()), static_cast<std::int16_t>(frames), 1, 1, 1};
  return stack;
}

int cmd_infer(InferArgs a, bool workers_given) {
  if (a.replay) {
    std::ifstream in(*a.replay);
    if (!in) throw etfce::IoError(*a.replay + ": cannot open for reading");
    const json manifest = json::parse(in);
    const std::string out = a.out;
    const int workers = a.workers;
    apply_config_json(manifest.at("config"), a);
    a.out = out;
    a.workers = workers_given ? workers : manifest.value("workers", 1);
  }
  if (!a.in == !a.list) throw UsageError("exactly one of --in or --list is required");
  if (a.design != "one-sample" && a.design != "two-sample") throw UsageError("--design must be one-sample or two-sample");
  if (a.tails != "positive" && a.tails != "negative" && a.tails != "two-sided")
    throw UsageError("--tails must be positive, negative or two-sided");
  if (a.mass_convention != "raw" && a.mass_convention != "excess")
    throw UsageError("--mass-convention must be raw or excess");
  if ((a.extent || a.mass) && !(a.cdt > 0.0)) throw UsageError("--cdt must be positive");
  if (a.no_tfce && !a.extent && !a.mass) throw UsageError("no statistic requested");
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  const auto t_start = std::chrono::steady_clock::now();
  const auto stack = load_subjects(a);
  const auto mask = load_mask(a.mask, stack);
  const auto conn = connectivity_arg(a.conn, stack.nz() == 1);
  const int n_subjects = static_cast<int>(stack.nt());
  std::vector<double> matrix;
  matrix.reserve(static_cast<std::size_t>(n_subjects) * mask->in_mask_count());
  for (int s = 0; s < n_subjects; ++s) {
    const auto row = etfce::nifti::dense_from_volume(stack, *mask, s);
    matrix.insert(matrix.end(), row.begin(), row.end());
  }
  const etfce::SubjectData data(mask, n_subjects, std::move(matrix));
  const double t_load = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  etfce::InferenceOptions opt;
  opt.conn = conn;
  opt.params = a.params;
  opt.workers = a.workers;
  opt.tails = a.tails == "positive" ? etfce::Tail::positive
              : a.tails == "negative" ? etfce::Tail::negative
                                      : etfce::Tail::two_sided;
  if (a.perm_matrix) {
    if (a.design != "one-sample") throw UsageError("--perm-matrix applies to one-sample designs");
    opt.plan = etfce::formats::read_permutation_matrix(*a.perm_matrix);
  } else {
    opt.plan.n_perm = a.n_perm;
    opt.plan.exhaustive = a.exhaustive;
  }
  opt.plan.seed = a.seed;
  if (a.design == "two-sample") {
    if (!a.labels) throw UsageError("two-sample designs need --labels");
    opt.plan.kind = etfce::RandomizationKind::two_sample_permutation;
    opt.plan.group_labels = parse_labels(*a.labels, n_subjects);
  }
  opt.requested.tfce = !a.no_tfce;
  if (a.extent) opt.requested.extent_cdt = a.cdt;
  if (a.mass) opt.requested.mass_cdt = a.cdt;
  opt.requested.mass_convention =
      a.mass_convention == "excess" ? etfce::MassConvention::excess : etfce::MassConvention::raw;
  if (a.discretized > 0) opt.discretization = etfce::DiscretizationScheme{a.discretized};

  const auto t_run = std::chrono::steady_clock::now();
  const auto result = etfce::run_inference(data, opt);
  const double run_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run).count();

  fs::create_directories(a.out);
  const fs::path out(a.out);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, std::span<const double> values, double fill) {
    write_map((out / name).string(), *mask, values, stack.header, fill);
    written.push_back(name);
  };
  emit("tstat.nii", result.observed_statistic->values(), 0.0);
  for (const auto& s : result.statistics) {
    const std::string stem = etfce::to_string(s.kind);
    for (const auto& t : s.tails) {
      const std::string suffix = t.tail == etfce::Tail::negative ? "_neg" : "";
      emit(stem + suffix + ".nii", t.null.observed.scores, 0.0);
      if (s.tails.size() > 1) emit(stem + suffix + (suffix.empty() ? "_pos" : "") + "_pfwe.nii", t.p.p, 0.0);
    }
    emit(stem + "_pfwe.nii", s.p.p, 0.0);
  }
  {
    std::ofstream csv(out / "null_distribution.csv");
    etfce::formats::write_null_csv(csv, result);
    written.push_back("null_distribution.csv");
  }
  {
    json clusters = {{"connectivity", etfce::to_string(conn)},
                     {"mass_convention", a.mass_convention},
                     {"tables", etfce::formats::cluster_results_json(result, *mask)}};
    std::ofstream(out / "clusters.json") << clusters.dump(2) << '\n';
    written.push_back("clusters.json");
  }
  const json config = infer_config_json(a);
  const double per = 1.0 / static_cast<double>(result.n_perm + 1);
  json manifest = {
      {"tool", "etfce"},
      {"version", kVersion},
      {"config", config},
      {"config_hash", hex(fnv1a(std::string(kVersion) + config.dump()))},
      {"workers", a.workers},
      {"n_subjects", n_subjects},
      {"in_mask_voxels", mask->in_mask_count()},
      {"n_perm", result.n_perm},
      {"warnings", result.warnings},
      {"outputs", written},
      {"timings_seconds",
       {{"load", t_load},
        {"inference", run_seconds},
        {"per_randomization",
         {{"statistic", result.times.statistic * per},
          {"forest", result.times.forest * per},
          {"tfce", result.times.tfce * per},
          {"cluster", result.times.cluster * per},
          {"total", result.times.total() * per}}}}}};
  std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string a, b;
  std::optional<std::string> mask, out, scatter;
  double alpha = 0.05;
};

int cmd_compare(const CompareArgs& c) {
  const auto va = read_single_map(c.a);
  const auto vb = read_single_map(c.b);
  if (va.voxels_per_frame() != vb.voxels_per_frame() || va.nx() != vb.nx() || va.ny() != vb.ny())
    throw etfce::StructuralError("p-value maps have different grids");
  std::shared_ptr<const etfce::Mask> mask;
  if (c.mask) {
    mask = load_mask(c.mask, va);
  } else {
    std::vector<std::uint8_t> in(va.data.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = va.data[i] > 0.0 && vb.data[i] > 0.0;
    mask = std::make_shared<const etfce::Mask>(va.shape(), std::move(in));
  }
  const etfce::PValueMap pa{mask, etfce::nifti::dense_from_volume(va, *mask)};
  const etfce::PValueMap pb{mask, etfce::nifti::dense_from_volume(vb, *mask)};
  const auto report = etfce::compare_pvalue_maps(pa, pb, c.alpha);
  json j = etfce::formats::comparison_json(report);
  j["a"] = c.a;
  j["b"] = c.b;
  j["d_definition"] = "log10(p_b) - log10(p_a)";
  const std::string text = j.dump(2);
  if (c.out)
    std::ofstream(*c.out) << text << '\n';
  else
    std::cout << text << '\n';
  if (c.scatter) {
    std::ofstream csv(*c.scatter);
    csv << "x,y,z,p_a,p_b,d\n";
    for (std::size_t v = 0; v < pa.p.size(); ++v) {
      const auto xyz = mask->coords(static_cast<etfce::Voxel>(v));
      csv << xyz[0] << ',' << xyz[1] << ',' << xyz[2] << ',' << etfce::formats::format_double(pa.p[v]) << ','
          << etfce::formats::format_double(pb.p[v]) << ',' << etfce::formats::format_double(report.d[v]) << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------- bench

int cmd_bench(etfce::BenchConfig cfg, const std::string& conn, bool as_json) {
  cfg.conn = connectivity_arg(conn);
  if (cfg.size < 2 || cfg.n_subjects < 2 || cfg.n_perm < 1) throw UsageError("bench needs size >= 2, subjects >= 2, n-perm >= 1");
  const auto rows = etfce::run_bench(cfg);
  if (as_json) {
    json out = json::array();
    for (const auto& r : rows)
      out.push_back({{"label", r.label},
                     {"total", r.per_randomization.total()},
                     {"statistic", r.per_randomization.statistic},
                     {"forest", r.per_randomization.forest},
                     {"tfce", r.per_randomization.tfce},
                     {"cluster_stats", r.per_randomization.cluster},
                     {"wall", r.wall_per_randomization}});
    std::cout << json{{"size", cfg.size}, {"voxels", std::int64_t{cfg.size} * cfg.size * cfg.size},
                      {"subjects", cfg.n_subjects}, {"n_perm", cfg.n_perm}, {"cdt", cfg.cdt},
                      {"seconds_per_randomization", out}}.dump(2)
              << '\n';
    return 0;
  }
  std::cout << "voxels " << std::int64_t{cfg.size} * cfg.size * cfg.size << ", subjects " << cfg.n_subjects
            << ", randomizations " << cfg.n_perm + 1 << ", cdt " << cfg.cdt << "\n"
            << "seconds per randomization\n";
  std::cout << std::left << std::setw(30) << "" << std::right << std::setw(11) << "total" << std::setw(11)
            << "statistic" << std::setw(11) << "forest" << std::setw(11) << "tfce" << std::setw(11) << "CE&CM"
            << '\n';
  std::cout << std::fixed << std::setprecision(5);
  for (const auto& r : rows)
    std::cout << std::left << std::setw(30) << r.label << std::right << std::setw(11) << r.per_randomization.total()
              << std::setw(11) << r.per_randomization.statistic << std::setw(11) << r.per_randomization.forest
              << std::setw(11) << r.per_randomization.tfce << std::setw(11) << r.per_randomization.cluster << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact threshold-free cluster enhancement and permutation inference"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TfceArgs tfce;
  auto* c_tfce = app.add_subcommand("tfce", "Exact (or uniform-threshold) TFCE of one statistic map");
  c_tfce->add_option("--in", tfce.in, "Input statistic map (.nii/.nii.gz)")->required();
  c_tfce->add_option("--mask", tfce.mask, "Mask (nonzero = analysed); default: finite nonzero input voxels");
  c_tfce->add_option("--out", tfce.out, "Output TFCE map")->required();
  c_tfce->add_option("-E", tfce.params.E, "Extent exponent")->capture_default_str();
  c_tfce->add_option("-H", tfce.params.H, "Height exponent")->capture_default_str();
  c_tfce->add_option("--h0", tfce.params.h0, "Integration lower bound")->capture_default_str();
  c_tfce->add_option("--conn", tfce.conn, "Connectivity: 6, 18, 26 (3D) or 4, 8 (2D); default 26, or 8 for one slice");
  c_tfce->add_option("--discretized", tfce.discretized, "Use n uniform thresholds instead of the exact integral");

  ClusterArgs cl;
  auto* c_cluster = app.add_subcommand("cluster", "Supra-threshold clusters of one statistic map");
  c_cluster->add_option("--in", cl.in, "Input statistic map")->required();
  c_cluster->add_option("--mask", cl.mask, "Mask");
  c_cluster->add_option("--out", cl.out, "Output JSON")->required();
  c_cluster->add_option("--cdt", cl.cdt, "Cluster-defining threshold (h >= cdt)")->capture_default_str();
  c_cluster->add_option("--conn", cl.conn, "Connectivity (default 26, or 8 for one slice)");
  c_cluster->add_option("--mass-convention", cl.mass, "raw or excess")->check(CLI::IsMember({"raw", "excess"}));

  InferArgs inf;
  inf.workers = default_workers();
  auto* c_infer = app.add_subcommand("infer", "Permutation inference with FWE-corrected p-values");
  c_infer->add_option("--in", inf.in, "4D subject stack (.nii/.nii.gz), one frame per subject");
  c_infer->add_option("--list", inf.list, "Text file listing one 3D subject map per line");
  c_infer->add_option("--mask", inf.mask, "Mask; default: finite and nonzero in every subject");
  c_infer->add_option("--out", inf.out, "Output directory")->capture_default_str();
  c_infer->add_option("--conn", inf.conn, "Connectivity (default 26, or 8 for one slice)");
  c_infer->add_option("-E", inf.params.E, "Extent exponent")->capture_default_str();
  c_infer->add_option("-H", inf.params.H, "Height exponent")->capture_default_str();
  c_infer->add_option("--h0", inf.params.h0, "Integration lower bound")->capture_default_str();
  c_infer->add_option("--n-perm", inf.n_perm, "Number of non-identity randomizations")->capture_default_str();
  c_infer->add_option("--seed", inf.seed, "Master seed")->capture_default_str();
  c_infer->add_flag("--exhaustive", inf.exhaustive, "Enumerate every sign pattern / label arrangement");
  c_infer->add_option("--design", inf.design, "one-sample (sign flips) or two-sample (label permutation)")
      ->capture_default_str();
  c_infer->add_option("--labels", inf.labels, "Two-sample group labels: 0/1 list or a file containing one");
  c_infer->add_option("--perm-matrix", inf.perm_matrix, "Sign-flip matrix file (first row identity)");
  c_infer->add_option("--tails", inf.tails, "positive, negative or two-sided")->capture_default_str();
  c_infer->add_flag("--no-tfce", inf.no_tfce, "Skip voxel-wise TFCE");
  c_infer->add_flag("--extent", inf.extent, "Cluster-extent inference at --cdt");
  c_infer->add_flag("--mass", inf.mass, "Cluster-mass inference at --cdt");
  c_infer->add_option("--cdt", inf.cdt, "Cluster-defining threshold")->capture_default_str();
  c_infer->add_option("--mass-convention", inf.mass_convention, "raw or excess")->capture_default_str();
  c_infer->add_option("--discretized", inf.discretized, "Use n uniform thresholds instead of exact TFCE");
  auto* workers_opt =
      c_infer->add_option("--workers", inf.workers, "Worker threads (default: $ETFCE_WORKERS or 1)");
  c_infer->add_option("--replay", inf.replay, "Re-run the configuration stored in a manifest.json");

  CompareArgs cmp;
  auto* c_compare = app.add_subcommand("compare", "Voxel-wise comparison of two p-value maps");
  c_compare->add_option("a", cmp.a, "First p-map")->required();
  c_compare->add_option("b", cmp.b, "Second p-map")->required();
  c_compare->add_option("--mask", cmp.mask, "Mask; default: voxels with p > 0 in both maps");
  c_compare->add_option("--alpha", cmp.alpha, "Significance level")->capture_default_str();
  c_compare->add_option("--out", cmp.out, "Output JSON (default: stdout)");
  c_compare->add_option("--scatter", cmp.scatter, "Per-voxel CSV of p_a, p_b and D");

  etfce::BenchConfig bench;
  std::string bench_conn = "26";
  bool bench_json = false;
  auto* c_bench = app.add_subcommand("bench", "Per-randomization timing on a synthetic phantom");
  c_bench->add_option("--size", bench.size, "Grid edge length")->capture_default_str();
  c_bench->add_option("--subjects", bench.n_subjects, "Number of subjects")->capture_default_str();
  c_bench->add_option("--n-perm", bench.n_perm, "Non-identity randomizations")->capture_default_str();
  c_bench->add_option("--conn", bench_conn, "Connectivity")->capture_default_str();
  c_bench->add_option("--cdt", bench.cdt, "Cluster-defining threshold")->capture_default_str();
  c_bench->add_option("--seed", bench.seed, "Phantom and randomization seed")->capture_default_str();
  c_bench->add_option("--discretized", bench.discretized_n, "Uniform-threshold count for the baseline row (0 = off)")
      ->capture_default_str();
  c_bench->add_option("--repeats", bench.repeats, "Best of this many runs per row")->capture_default_str();
  c_bench->add_flag("--json", bench_json, "Emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_tfce) return cmd_tfce(tfce);
    if (*c_cluster) return cmd_cluster(cl);
    if (*c_infer) return cmd_infer(inf, workers_opt->count() > 0);
    if (*c_compare) return cmd_compare(cmp);
    if (*c_bench) return cmd_bench(bench, bench_conn, bench_json);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    const char* kind = dynamic_cast<const etfce::FormatError*>(&e)       ? "format"
                       : dynamic_cast<const etfce::StructuralError*>(&e) ? "structural"
                       : dynamic_cast<const etfce::BudgetError*>(&e)     ? "budget"
                       : dynamic_cast<const etfce::IoError*>(&e)         ? "io"
                                                                          : "runtime";
    std::cerr << json{{"error", kind}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 2;
}
