#include "sila/io.hpp"

#include "sila/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace sila {

using nlohmann::json;

namespace {

// ---- canonical JSON output -------------------------------------------------

void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw DataError("cannot serialize a non-finite number");
  out += fmt::format("{:.17g}", v);
}

void write_json(std::string& out, const json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: keys sorted
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += flat ? "[" : "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",\n";
        first = false;
        if (!flat) out += pad;
        write_json(out, e, indent, depth + 1);
      }
      out += flat ? "]" : "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float:
      write_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

std::string canonical(const json& j) {
  std::string out;
  write_json(out, j, 2, 0);
  out += "\n";
  return out;
}

// ---- checked JSON input ----------------------------------------------------

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw DataError(fmt::format("{}: parse error at line {}: {}", source, line, e.what()));
  }
}

struct Reader {
  std::string source;

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw DataError(fmt::format("{}: field '{}': {}", source, path, what));
  }

  const json& field(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing");
    return *it;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "not finite");
    return d;
  }

  long integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long>();
  }

  const json& array(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  Vec2 vec2(const json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 2) fail(path, "expected a pair of numbers");
    return {number(v[0], path + "[0]"), number(v[1], path + "[1]")};
  }

  double num_field(const json& obj, const std::string& path, const char* key) const {
    return number(field(obj, path, key), join(path, key));
  }

  long int_field(const json& obj, const std::string& path, const char* key) const {
    return integer(field(obj, path, key), join(path, key));
  }

  static std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
  static std::string at(const std::string& path, std::size_t i) { return fmt::format("{}[{}]", path, i); }

  void check_version(const json& root) const {
    const long v = int_field(root, "", "version");
    if (v != kFormatVersion) throw DataError(fmt::format("{}: unsupported format version {} (expected {})", source, v, kFormatVersion));
  }
};

// ---- model pieces ----------------------------------------------------------

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json gp_json(const SparseGP& gp, long training_count) {
  json j;
  json z = json::array();
  for (Eigen::Index k = 0; k < gp.pseudo_inputs().rows(); ++k) {
    z.push_back(json::array({gp.pseudo_inputs()(k, 0), gp.pseudo_inputs()(k, 1)}));
  }
  j["pseudo_inputs"] = std::move(z);
  j["lengthscale_a"] = gp.hyper().lengthscale_a;
  j["lengthscale_b"] = gp.hyper().lengthscale_b;
  j["signal_var"] = gp.hyper().signal_var;
  j["noise_var"] = gp.hyper().noise_var;
  j["training_count"] = training_count;
  j["inducing_mean"] = std::vector<double>(gp.inducing_mean().data(), gp.inducing_mean().data() + gp.inducing_mean().size());
  json cov = json::array();
  for (Eigen::Index r = 0; r < gp.inducing_cov().rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < gp.inducing_cov().cols(); ++c) row.push_back(gp.inducing_cov()(r, c));
    cov.push_back(std::move(row));
  }
  j["inducing_cov"] = std::move(cov);
  return j;
}

SparseGP gp_from_json(const Reader& rd, const json& j, const std::string& path, long& training_count) {
  const json& z = rd.array(rd.field(j, path, "pseudo_inputs"), Reader::join(path, "pseudo_inputs"));
  const auto m = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixX2d Z(m, 2);
  for (Eigen::Index k = 0; k < m; ++k) {
    Z.row(k) = rd.vec2(z[static_cast<std::size_t>(k)], Reader::at(Reader::join(path, "pseudo_inputs"), static_cast<std::size_t>(k))).transpose();
  }
  GpHyper h;
  h.lengthscale_a = rd.num_field(j, path, "lengthscale_a");
  h.lengthscale_b = rd.num_field(j, path, "lengthscale_b");
  h.signal_var = rd.num_field(j, path, "signal_var");
  h.noise_var = rd.num_field(j, path, "noise_var");
  training_count = rd.int_field(j, path, "training_count");
  const std::string mpath = Reader::join(path, "inducing_mean");
  const json& mu = rd.array(rd.field(j, path, "inducing_mean"), mpath);
  if (static_cast<Eigen::Index>(mu.size()) != m) rd.fail(mpath, "length differs from the pseudo-input count");
  Eigen::VectorXd mean(m);
  for (Eigen::Index k = 0; k < m; ++k) mean(k) = rd.number(mu[static_cast<std::size_t>(k)], Reader::at(mpath, static_cast<std::size_t>(k)));
  const std::string cpath = Reader::join(path, "inducing_cov");
  const json& cv = rd.array(rd.field(j, path, "inducing_cov"), cpath);
  if (static_cast<Eigen::Index>(cv.size()) != m) rd.fail(cpath, "row count differs from the pseudo-input count");
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::string rpath = Reader::at(cpath, static_cast<std::size_t>(r));
    const json& row = rd.array(cv[static_cast<std::size_t>(r)], rpath);
    if (static_cast<Eigen::Index>(row.size()) != m) rd.fail(rpath, "column count differs from the pseudo-input count");
    for (Eigen::Index c = 0; c < m; ++c) cov(r, c) = rd.number(row[static_cast<std::size_t>(c)], Reader::at(rpath, static_cast<std::size_t>(c)));
  }
  try {
    return SparseGP::from_posterior(std::move(Z), h, std::move(mean), std::move(cov));
  } catch (const DataError& e) {
    rd.fail(path, e.what());
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

double csv_double(const std::string& s, const std::string& source, std::size_t line, const char* column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(fmt::format("{}: line {}: invalid {} '{}'", source, line, column, s));
  }
  return v;
}

int csv_int(const std::string& s, const std::string& source, std::size_t line, const char* column) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(fmt::format("{}: line {}: invalid {} '{}'", source, line, column, s));
  }
  return v;
}

void check_csv_text(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",\n\r\"") != std::string::npos) {
    throw DataError(fmt::format("{} '{}' cannot be written to CSV", what, s));
  }
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += fmt::format(".tmp.{}", ::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    out.flush();
    if (!out) throw DataError(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string model_to_json(const Model& model) {
  json root;
  root["version"] = kFormatVersion;
  root["episode"] = model.episode;
  root["grid"] = {{"rows", model.grid.rows},
                  {"cols", model.grid.cols},
                  {"min_corner", vec2_json(model.grid.min_corner)},
                  {"cell_size", model.grid.cell_size}};
  json prims = json::array();
  for (const auto& a : model.dict.atoms) {
    json cells = json::array();
    for (const auto& c : a.field.cells()) cells.push_back({{"index", c.cell}, {"vx", c.v.x()}, {"vy", c.v.y()}});
    prims.push_back({{"id", a.id}, {"cells", std::move(cells)}});
  }
  root["primitives"] = std::move(prims);
  json edges = json::array();
  for (const auto& t : model.transitions) {
    edges.push_back({{"from", t.from},
                     {"to", t.to},
                     {"count", t.count},
                     {"gp_x", gp_json(t.flow.gp_a, t.flow.training_count)},
                     {"gp_y", gp_json(t.flow.gp_b, t.flow.training_count)}});
  }
  root["transitions"] = std::move(edges);
  return canonical(root);
}

Model model_from_json(const std::string& text, const std::string& source) {
  const json root = parse_json(text, source);
  const Reader rd{source};
  rd.check_version(root);
  Model m;
  m.episode = static_cast<int>(rd.int_field(root, "", "episode"));
  const json& g = rd.field(root, "", "grid");
  m.grid.rows = static_cast<int>(rd.int_field(g, "grid", "rows"));
  m.grid.cols = static_cast<int>(rd.int_field(g, "grid", "cols"));
  m.grid.min_corner = rd.vec2(rd.field(g, "grid", "min_corner"), "grid.min_corner");
  m.grid.cell_size = rd.num_field(g, "grid", "cell_size");
  try {
    m.grid.validate();
  } catch (const DataError& e) {
    rd.fail("grid", e.what());
  }

  const json& prims = rd.array(rd.field(root, "", "primitives"), "primitives");
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const std::string path = Reader::at("primitives", i);
    const int id = static_cast<int>(rd.int_field(prims[i], path, "id"));
    const json& cells = rd.array(rd.field(prims[i], path, "cells"), path + ".cells");
    std::vector<CellVelocity> cv;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string cpath = Reader::at(path + ".cells", k);
      const long index = rd.int_field(cells[k], cpath, "index");
      if (index < 0 || index >= m.grid.size()) rd.fail(cpath + ".index", "outside the grid");
      cv.push_back({static_cast<int>(index), Vec2(rd.num_field(cells[k], cpath, "vx"), rd.num_field(cells[k], cpath, "vy"))});
    }
    try {
      m.dict.atoms.push_back({id, CellField(m.grid.size(), std::move(cv))});
    } catch (const DataError& e) {
      rd.fail(path, e.what());
    }
  }

  const json& edges = rd.array(rd.field(root, "", "transitions"), "transitions");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = Reader::at("transitions", i);
    Transition t;
    t.from = static_cast<int>(rd.int_field(edges[i], path, "from"));
    t.to = static_cast<int>(rd.int_field(edges[i], path, "to"));
    t.count = static_cast<int>(rd.int_field(edges[i], path, "count"));
    long count_b = 0;
    t.flow.gp_a = gp_from_json(rd, rd.field(edges[i], path, "gp_x"), path + ".gp_x", t.flow.training_count);
    t.flow.gp_b = gp_from_json(rd, rd.field(edges[i], path, "gp_y"), path + ".gp_y", count_b);
    m.transitions.push_back(std::move(t));
  }
  try {
    m.validate();
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", source, e.what()));
  }
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

Model load_model(const std::filesystem::path& path) { return model_from_json(read_file(path), path.string()); }

std::string trajectories_to_csv(std::span<const RawTrajectory> trajs) {
  std::string out = "traj_id,t,x,y\n";
  for (const auto& t : trajs) {
    check_csv_text(t.id, "trajectory id");
    for (const auto& s : t.samples) out += fmt::format("{},{},{},{}\n", t.id, g17(s.t), g17(s.p.x()), g17(s.p.y()));
  }
  return out;
}

std::vector<RawTrajectory> trajectories_from_csv(const std::string& text, const std::string& frame_id,
                                                 const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(fmt::format("{}: empty file", source));
  const auto header = split(lines[0], ',');
  const bool with_frame = header.size() == 5 && header[4] == "frame_id";
  if (!(header == std::vector<std::string>{"traj_id", "t", "x", "y"}) && !with_frame) {
    throw DataError(fmt::format("{}: line 1: expected header 'traj_id,t,x,y[,frame_id]'", source));
  }
  std::vector<RawTrajectory> out;
  std::map<std::string, std::size_t> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cols = split(lines[ln], ',');
    if (cols.size() != header.size()) {
      throw DataError(fmt::format("{}: line {}: expected {} columns, found {}", source, ln + 1, header.size(), cols.size()));
    }
    if (cols[0].empty()) throw DataError(fmt::format("{}: line {}: empty traj_id", source, ln + 1));
    if (out.empty() || out.back().id != cols[0]) {
      if (seen.contains(cols[0])) {
        throw DataError(fmt::format("{}: line {}: rows of trajectory '{}' are not contiguous", source, ln + 1, cols[0]));
      }
      seen[cols[0]] = out.size();
      out.push_back({cols[0], with_frame ? cols[4] : frame_id, {}});
    }
    out.back().samples.push_back({csv_double(cols[1], source, ln + 1, "t"),
                                  Vec2(csv_double(cols[2], source, ln + 1, "x"), csv_double(cols[3], source, ln + 1, "y"))});
  }
  for (const auto& t : out) {
    try {
      validate_samples(t.samples, t.id);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}: {}", source, e.what()));
    }
  }
  return out;
}

std::string frames_to_json(std::span<const IntersectionFrame> frames) {
  json root;
  root["version"] = kFormatVersion;
  json arr = json::array();
  for (const auto& f : frames) {
    arr.push_back({{"name", f.name},
                   {"origin", vec2_json(f.origin)},
                   {"axis1", vec2_json(f.axis1)},
                   {"axis2", vec2_json(f.axis2)},
                   {"sidewalk_width", f.sidewalk_width}});
  }
  root["frames"] = std::move(arr);
  return canonical(root);
}

std::vector<IntersectionFrame> frames_from_json(const std::string& text, const std::string& source) {
  const json root = parse_json(text, source);
  const Reader rd{source};
  rd.check_version(root);
  const json& arr = rd.array(rd.field(root, "", "frames"), "frames");
  std::vector<IntersectionFrame> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = Reader::at("frames", i);
    IntersectionFrame f;
    f.name = rd.string(rd.field(arr[i], path, "name"), path + ".name");
    f.origin = rd.vec2(rd.field(arr[i], path, "origin"), path + ".origin");
    f.axis1 = rd.vec2(rd.field(arr[i], path, "axis1"), path + ".axis1");
    f.axis2 = rd.vec2(rd.field(arr[i], path, "axis2"), path + ".axis2");
    f.sidewalk_width = rd.num_field(arr[i], path, "sidewalk_width");
    try {
      f.validate();
    } catch (const DataError& e) {
      rd.fail(path, e.what());
    }
    out.push_back(std::move(f));
  }
  if (out.empty()) rd.fail("frames", "no frames");
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  const auto frames_path = dir / "frames.json";
  const auto traj_path = dir / "trajectories.csv";
  d.frames = frames_from_json(read_file(frames_path), frames_path.string());
  d.trajectories = trajectories_from_csv(read_file(traj_path), d.frames.front().name, traj_path.string());
  for (const auto& t : d.trajectories) {
    if (d.frame(t.frame_id) == nullptr) {
      throw DataError(fmt::format("{}: trajectory '{}' refers to unknown frame '{}'", traj_path.string(), t.id, t.frame_id));
    }
  }
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  if (data.frames.empty()) throw DataError("dataset has no frames");
  const bool single = data.frames.size() == 1;
  std::string csv;
  if (single) {
    csv = trajectories_to_csv(data.trajectories);
  } else {
    csv = "traj_id,t,x,y,frame_id\n";
    for (const auto& t : data.trajectories) {
      check_csv_text(t.id, "trajectory id");
      check_csv_text(t.frame_id, "frame id");
      for (const auto& s : t.samples) {
        csv += fmt::format("{},{},{},{},{}\n", t.id, g17(s.t), g17(s.p.x()), g17(s.p.y()), t.frame_id);
      }
    }
  }
  write_file_atomic(dir / "trajectories.csv", csv);
  write_file_atomic(dir / "frames.json", frames_to_json(data.frames));
}

std::string predictions_to_json(const NormalizedTrajectory& observation, const PredictionSet& preds) {
  json root;
  root["version"] = kFormatVersion;
  json obs = json::array();
  for (const auto& s : observation.samples) obs.push_back(json::array({s.t, s.p.x(), s.p.y()}));
  root["observation"] = {{"id", observation.id}, {"samples", std::move(obs)}};
  json hyps = json::array();
  for (const auto& h : preds.hypotheses) {
    json pts = json::array();
    for (const auto& p : h.path) pts.push_back(vec2_json(p));
    hyps.push_back({{"weight", h.weight}, {"nll", -h.log_lik}, {"primitives", h.primitives}, {"points", std::move(pts)}});
  }
  root["hypotheses"] = std::move(hyps);
  return canonical(root);
}

std::string results_to_csv(std::span<const EpisodeRecord> records) {
  std::string out = "method,trial,episode,weighted_mhd,primitives,transitions,total_size,learn_time_s\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.method, r.trial, r.episode, g17(r.weighted_mhd), r.primitives,
                       r.transitions, r.total_size(), g17(r.learn_time_s));
  }
  return out;
}

std::vector<EpisodeRecord> results_from_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "method,trial,episode,weighted_mhd,primitives,transitions,total_size,learn_time_s") {
    throw DataError(fmt::format("{}: line 1: unexpected header", source));
  }
  std::vector<EpisodeRecord> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto c = split(lines[ln], ',');
    if (c.size() != 8) throw DataError(fmt::format("{}: line {}: expected 8 columns", source, ln + 1));
    EpisodeRecord r;
    r.method = c[0];
    r.trial = csv_int(c[1], source, ln + 1, "trial");
    r.episode = csv_int(c[2], source, ln + 1, "episode");
    r.weighted_mhd = csv_double(c[3], source, ln + 1, "weighted_mhd");
    r.primitives = csv_int(c[4], source, ln + 1, "primitives");
    r.transitions = csv_int(c[5], source, ln + 1, "transitions");
    if (csv_int(c[6], source, ln + 1, "total_size") != r.total_size()) {
      throw DataError(fmt::format("{}: line {}: total_size is not primitives + transitions", source, ln + 1));
    }
    r.learn_time_s = csv_double(c[7], source, ln + 1, "learn_time_s");
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_to_csv(const Summary& summary) {
  std::string out =
      "method,episode,trials,mhd_mean,mhd_std,primitives_mean,primitives_std,transitions_mean,transitions_std,"
      "total_mean,total_std,time_mean,time_std,growth_rate\n";
  for (const auto& r : summary.rows) {
    auto it = summary.growth_rate.find(r.method);
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.method, r.episode, r.trials, g17(r.mhd_mean),
                       g17(r.mhd_std), g17(r.primitives_mean), g17(r.primitives_std), g17(r.transitions_mean),
                       g17(r.transitions_std), g17(r.total_mean), g17(r.total_std), g17(r.time_mean),
                       g17(r.time_std), it == summary.growth_rate.end() ? std::string() : g17(it->second));
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json root;
  root["version"] = kFormatVersion;
  root["weighted_mhd_mean"] = report.weighted_mhd_mean;
  root["model_primitives"] = report.model_primitives;
  root["model_transitions"] = report.model_transitions;
  root["learn_time_s"] = report.learn_time_s;
  json per = json::array();
  for (const auto& s : report.per_trajectory) {
    per.push_back({{"id", s.id}, {"weighted_mhd", s.weighted_mhd}, {"fallback", s.fallback}});
  }
  root["per_trajectory"] = std::move(per);
  return canonical(root);
}

}  // namespace sila
