#include "szl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "szl/parallel.hpp"

namespace szl {

using nlohmann::json;

namespace {

const char* kExample14 = R"({
  "schema_version": 1,
  "id": "example-1-4",
  "model": {"n": 1, "normalization": "dsigma/2pi"},
  "legendrian": {"family": "knot", "params": [0.0]},
  "probes": [
    {"id": "on-curve", "on_lambda": [0.0], "check_fit": true},
    {"id": "off-orbit", "coords": [[1.0, 0.0], [0.0, 1.0]]},
    {"id": "normal-0.5", "on_lambda": [0.0], "frame": "adapted", "w": {"re": [0.5], "im": [0.0]}},
    {"id": "normal-1.0", "on_lambda": [0.0], "frame": "adapted", "w": {"re": [1.0], "im": [0.0]}},
    {"id": "tangent-1.0", "on_lambda": [0.0], "frame": "adapted", "w": {"re": [0.0], "im": [1.0]}}
  ],
  "k_range": {"min": 50, "max": 400, "step": 2, "parity": "even"},
  "quadrature": {"min_nodes": 256, "nodes_per_sqrt_k": 8},
  "report": {
    "prediction_rel_tol": 0.05,
    "zero_abs_tol": 1e-8,
    "compare_k_min": 100,
    "rapid_decay_n_max": 5,
    "rapid_decay_drop": 1000.0,
    "noise_floor": 1e-12,
    "expect_exponent": 0.5,
    "exponent_tol": 0.02,
    "expect_coefficient": 1.5957691216057308,
    "coefficient_tol": 0.02
  },
  "output": {"dir": "results/example-1-4"}
}
)";

const char* kExample15 = R"({
  "schema_version": 1,
  "id": "example-1-5",
  "model": {"n": 1, "normalization": "dsigma/2pi"},
  "legendrian": {"family": "knot", "params": [0.0]},
  "action": {"weights": [[1, -1]], "shift": [0]},
  "varpi_list": [[0], [1], [-1], [2], [-2]],
  "probes": [
    {"id": "orbit-point", "on_lambda": [0.7853981633974483]},
    {"id": "off-orbit", "coords": [[0.9, 0.0], [0.4358898943540674, 0.0]]}
  ],
  "k_range": {"min": 100, "max": 300, "step": 1, "parity": "all"},
  "quadrature": {"min_nodes": 256, "nodes_per_sqrt_k": 8},
  "report": {
    "prediction_rel_tol": 0.05,
    "zero_abs_tol": 1e-8,
    "compare_k_min": 100,
    "rapid_decay_n_max": 5,
    "rapid_decay_drop": 1000.0,
    "noise_floor": 1e-12
  },
  "output": {"dir": "results/example-1-5"}
}
)";

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error("config " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path, "missing field '" + key + "'");
  return j.at(key);
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long>();
}

std::vector<double> num_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<double> v;
  for (size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<int> v;
  for (size_t i = 0; i < j.size(); ++i) v.push_back(static_cast<int>(integer(j[i], path + "[" + std::to_string(i) + "]")));
  return v;
}

cplx complex_of(const json& j, const std::string& path) {
  std::vector<double> v = num_list(j, path);
  if (v.size() != 2) fail(path, "expected [re, im]");
  return {v[0], v[1]};
}

LegendrianSpec parse_legendrian(const json& j, const std::string& path) {
  LegendrianSpec s;
  const json& fam = need(j, "family", path);
  if (!fam.is_string()) fail(path + ".family", "expected a string");
  s.family = fam.get<std::string>();
  if (j.contains("params")) s.params = num_list(j.at("params"), path + ".params");
  if (j.contains("f_lambda")) {
    const json& f = j.at("f_lambda");
    const std::string fp = path + ".f_lambda";
    if (!f.is_array()) fail(fp, "expected an array of {m, c} modes");
    for (size_t i = 0; i < f.size(); ++i) {
      const std::string mp = fp + "[" + std::to_string(i) + "]";
      s.f_modes.emplace_back(int_list(need(f[i], "m", mp), mp + ".m"), complex_of(need(f[i], "c", mp), mp + ".c"));
    }
  }
  return s;
}

json legendrian_json(const LegendrianSpec& s) {
  json j;
  j["family"] = s.family;
  j["params"] = s.params;
  if (!s.f_modes.empty()) {
    json modes = json::array();
    for (const auto& [m, c] : s.f_modes) modes.push_back({{"m", m}, {"c", {c.real(), c.imag()}}});
    j["f_lambda"] = modes;
  }
  return j;
}

CVec complex_vector(const json& j, const std::string& path) {
  // {"re": [...], "im": [...]}
  std::vector<double> re = num_list(need(j, "re", path), path + ".re");
  std::vector<double> im = j.contains("im") ? num_list(j.at("im"), path + ".im") : std::vector<double>(re.size(), 0.0);
  if (re.size() != im.size()) fail(path, "re and im lengths differ");
  CVec v(re.size());
  for (size_t i = 0; i < re.size(); ++i) v(i) = cplx(re[i], im[i]);
  return v;
}

std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string varpi_str(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

LegendrianImmersion LegendrianSpec::build() const {
  Vec p = Eigen::Map<const Vec>(params.data(), static_cast<Eigen::Index>(params.size()));
  LegendrianImmersion L = make_builtin(family, p);
  if (f_modes.empty()) return L;
  auto modes = f_modes;
  int wdeg = 0;
  for (const auto& [m, c] : modes) {
    if (static_cast<int>(m.size()) != L.dim()) throw Error("f_lambda mode has wrong length");
    for (int v : m) wdeg = std::max(wdeg, std::abs(v));
  }
  const int deg = L.trig_degree();
  return L.with_weight([modes](const Vec& t) {
    cplx s = 0.0;
    for (const auto& [m, c] : modes) {
      double ph = 0.0;
      for (size_t j = 0; j < m.size(); ++j) ph += m[j] * t(static_cast<Eigen::Index>(j));
      s += c * std::polar(1.0, ph);
    }
    return s;
  }).with_trig_degree(deg, wdeg);
}

std::vector<long> ExperimentConfig::ks() const {
  std::vector<long> out;
  if (k_step <= 0) return out;
  for (long k = k_min; k <= k_max; k += k_step) {
    if (parity == "even" && k % 2 != 0) continue;
    if (parity == "odd" && k % 2 == 0) continue;
    out.push_back(k);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.schema_version = static_cast<int>(integer(need(j, "schema_version", "$"), "$.schema_version"));
  if (c.schema_version != kSchemaVersion)
    fail("$.schema_version", "unsupported version " + std::to_string(c.schema_version));
  const json& id = need(j, "id", "$");
  if (!id.is_string()) fail("$.id", "expected a string");
  c.id = id.get<std::string>();

  const json& model = need(j, "model", "$");
  c.n = static_cast<int>(integer(need(model, "n", "$.model"), "$.model.n"));
  if (model.contains("normalization")) c.normalization = model.at("normalization").get<std::string>();
  c.legendrian = parse_legendrian(need(j, "legendrian", "$"), "$.legendrian");

  if (j.contains("action")) {
    const json& a = j.at("action");
    const json& w = need(a, "weights", "$.action");
    if (!w.is_array() || w.empty()) fail("$.action.weights", "expected a nonempty array of rows");
    const int g = static_cast<int>(w.size());
    std::vector<std::vector<int>> rows;
    for (int r = 0; r < g; ++r) rows.push_back(int_list(w[r], "$.action.weights[" + std::to_string(r) + "]"));
    const int cols = static_cast<int>(rows[0].size());
    Eigen::MatrixXi W(g, cols);
    for (int r = 0; r < g; ++r) {
      if (static_cast<int>(rows[r].size()) != cols) fail("$.action.weights", "rows have different lengths");
      for (int q = 0; q < cols; ++q) W(r, q) = rows[r][q];
    }
    std::vector<double> sh = a.contains("shift") ? num_list(a.at("shift"), "$.action.shift") : std::vector<double>(g, 0.0);
    if (static_cast<int>(sh.size()) != g) fail("$.action.shift", "needs one entry per weight row");
    c.action = TorusAction(W, Eigen::Map<Vec>(sh.data(), g));
    if (j.contains("varpi_list")) {
      const json& vl = j.at("varpi_list");
      if (!vl.is_array()) fail("$.varpi_list", "expected an array");
      for (size_t i = 0; i < vl.size(); ++i) {
        std::vector<int> v = int_list(vl[i], "$.varpi_list[" + std::to_string(i) + "]");
        c.varpi_list.push_back(Eigen::Map<Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    } else {
      c.varpi_list.push_back(Eigen::VectorXi::Zero(g));
    }
  } else if (j.contains("varpi_list")) {
    fail("$.varpi_list", "given without an action");
  }

  const json& probes = need(j, "probes", "$");
  if (!probes.is_array()) fail("$.probes", "expected an array");
  for (size_t i = 0; i < probes.size(); ++i) {
    const std::string pp = "$.probes[" + std::to_string(i) + "]";
    const json& p = probes[i];
    ProbeSpec ps;
    const json& pid = need(p, "id", pp);
    if (!pid.is_string()) fail(pp + ".id", "expected a string");
    ps.id = pid.get<std::string>();
    if (p.contains("coords")) {
      const json& cs = p.at("coords");
      if (!cs.is_array()) fail(pp + ".coords", "expected an array of [re, im]");
      CVec v(cs.size());
      for (size_t q = 0; q < cs.size(); ++q) v(q) = complex_of(cs[q], pp + ".coords[" + std::to_string(q) + "]");
      ps.coords = v;
    }
    if (p.contains("on_lambda")) ps.on = num_list(p.at("on_lambda"), pp + ".on_lambda");
    if (p.contains("w")) ps.w = complex_vector(p.at("w"), pp + ".w");
    if (p.contains("frame")) {
      const std::string f = p.at("frame").get<std::string>();
      if (f != "adapted" && f != "standard") fail(pp + ".frame", "expected 'adapted' or 'standard'");
      ps.adapted_frame = f == "adapted";
    }
    if (p.contains("check_fit")) ps.check_fit = p.at("check_fit").get<bool>();
    c.probes.push_back(ps);
  }

  if (j.contains("pairing")) c.pairing_sigma = parse_legendrian(need(j.at("pairing"), "sigma", "$.pairing"), "$.pairing.sigma");

  const json& kr = need(j, "k_range", "$");
  c.k_min = integer(need(kr, "min", "$.k_range"), "$.k_range.min");
  c.k_max = integer(need(kr, "max", "$.k_range"), "$.k_range.max");
  if (kr.contains("step")) c.k_step = integer(kr.at("step"), "$.k_range.step");
  if (kr.contains("parity")) c.parity = kr.at("parity").get<std::string>();

  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    if (q.contains("min_nodes")) c.quadrature.min_nodes = static_cast<int>(integer(q.at("min_nodes"), "$.quadrature.min_nodes"));
    if (q.contains("nodes_per_sqrt_k"))
      c.quadrature.nodes_per_sqrt_k = static_cast<int>(integer(q.at("nodes_per_sqrt_k"), "$.quadrature.nodes_per_sqrt_k"));
    if (q.contains("check_convergence")) c.quadrature.check_convergence = q.at("check_convergence").get<bool>();
    if (q.contains("tolerance")) c.quadrature.tolerance = num(q.at("tolerance"), "$.quadrature.tolerance");
  }
  if (j.contains("report")) {
    const json& r = j.at("report");
    ReportThresholds& t = c.thresholds;
    if (r.contains("prediction_rel_tol")) t.prediction_rel_tol = num(r.at("prediction_rel_tol"), "$.report.prediction_rel_tol");
    if (r.contains("zero_abs_tol")) t.zero_abs_tol = num(r.at("zero_abs_tol"), "$.report.zero_abs_tol");
    if (r.contains("compare_k_min")) t.compare_k_min = integer(r.at("compare_k_min"), "$.report.compare_k_min");
    if (r.contains("rapid_decay_n_max"))
      t.rapid_decay_n_max = static_cast<int>(integer(r.at("rapid_decay_n_max"), "$.report.rapid_decay_n_max"));
    if (r.contains("rapid_decay_drop")) t.rapid_decay_drop = num(r.at("rapid_decay_drop"), "$.report.rapid_decay_drop");
    if (r.contains("noise_floor")) t.noise_floor = num(r.at("noise_floor"), "$.report.noise_floor");
    if (r.contains("expect_exponent")) t.expect_exponent = num(r.at("expect_exponent"), "$.report.expect_exponent");
    if (r.contains("exponent_tol")) t.exponent_tol = num(r.at("exponent_tol"), "$.report.exponent_tol");
    if (r.contains("expect_coefficient")) t.expect_coefficient = num(r.at("expect_coefficient"), "$.report.expect_coefficient");
    if (r.contains("coefficient_tol")) t.coefficient_tol = num(r.at("coefficient_tol"), "$.report.coefficient_tol");
  }
  if (j.contains("output") && j.at("output").contains("dir")) c.output_dir = j.at("output").at("dir").get<std::string>();

  // Probe points are unit-normalized on load.
  for (ProbeSpec& p : c.probes)
    if (p.coords && p.coords->norm() > 0.0) *p.coords = p.coords->normalized();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  if (c.schema_version != kSchemaVersion) fail("$.schema_version", "unsupported version");
  if (c.id.empty()) fail("$.id", "must be nonempty");
  if (c.n < 1) fail("$.model.n", "must be at least 1");
  if (c.normalization != "dsigma/2pi") fail("$.model.normalization", "only 'dsigma/2pi' is implemented");
  LegendrianImmersion L = c.legendrian.build();
  if (L.n() != c.n) fail("$.legendrian", "family lives in a different dimension than model.n");
  if (c.pairing_sigma) {
    LegendrianImmersion S = c.pairing_sigma->build();
    if (S.n() != c.n || S.dim() != L.dim()) fail("$.pairing.sigma", "dimension differs from the Legendrian");
  }
  if (c.k_step < 1) fail("$.k_range.step", "must be positive");
  if (c.parity != "all" && c.parity != "even" && c.parity != "odd") fail("$.k_range.parity", "expected all, even or odd");
  if (c.k_min < 1) fail("$.k_range.min", "must be at least 1");
  if (c.ks().empty()) fail("$.k_range", "is empty");
  if (c.probes.empty() && !c.pairing_sigma) fail("$.probes", "needs at least one probe");
  std::set<std::string> ids;
  for (const ProbeSpec& p : c.probes) {
    const std::string pp = "$.probes[" + p.id + "]";
    if (p.id.empty() || p.id == "pairing") fail(pp, "invalid probe id");
    if (!ids.insert(p.id).second) fail(pp, "duplicate probe id");
    if (p.coords.has_value() == p.on.has_value()) fail(pp, "give exactly one of coords and on_lambda");
    if (p.coords && (p.coords->size() != c.n + 1 || std::fabs(p.coords->norm() - 1.0) > 1e-12))
      fail(pp + ".coords", "needs n+1 entries, not all zero");
    if (p.on && static_cast<int>(p.on->size()) != L.dim()) fail(pp + ".on_lambda", "needs one parameter per dimension");
    if (p.w.size() != 0 && p.w.size() != c.n) fail(pp + ".w", "needs n entries");
    if (p.adapted_frame && !p.on) fail(pp + ".frame", "the adapted frame needs an on_lambda probe");
  }
  if (c.action) {
    const TorusAction& a = *c.action;
    if (a.n() != c.n) fail("$.action.weights", "rows need n+1 entries");
    if ((a.shift().array() - a.shift().array().round()).abs().maxCoeff() > 1e-12)
      fail("$.action.shift", "must be integral");
    if (c.varpi_list.empty()) fail("$.varpi_list", "must be nonempty");
    for (const auto& v : c.varpi_list)
      if (v.size() != a.g()) fail("$.varpi_list", "entries need one integer per weight row");
  } else if (!c.varpi_list.empty()) {
    fail("$.varpi_list", "given without an action");
  }
  if (c.quadrature.min_nodes < 4 || c.quadrature.nodes_per_sqrt_k < 1) fail("$.quadrature", "node counts too small");
  const ReportThresholds& t = c.thresholds;
  if (!(t.prediction_rel_tol > 0) || !(t.zero_abs_tol > 0) || !(t.rapid_decay_drop > 1) || !(t.noise_floor >= 0)) fail("$.report", "tolerances must be positive");
  if (t.expect_exponent.has_value() != t.exponent_tol.has_value())
    fail("$.report", "expect_exponent and exponent_tol go together");
  if (t.expect_coefficient.has_value() != t.coefficient_tol.has_value())
    fail("$.report", "expect_coefficient and coefficient_tol go together");
}

std::vector<std::string> builtin_config_names() { return {"example-1-4", "example-1-5"}; }

std::string builtin_config_text(const std::string& name) {
  if (name == "example-1-4") return kExample14;
  if (name == "example-1-5") return kExample15;
  throw Error("unknown built-in config '" + name + "'");
}

std::string config_hash(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["n"] = c.n;
  j["normalization"] = c.normalization;
  j["legendrian"] = legendrian_json(c.legendrian);
  if (c.pairing_sigma) j["sigma"] = legendrian_json(*c.pairing_sigma);
  if (c.action) {
    std::vector<std::vector<int>> w;
    for (int r = 0; r < c.action->g(); ++r) {
      std::vector<int> row;
      for (int q = 0; q <= c.action->n(); ++q) row.push_back(c.action->weights()(r, q));
      w.push_back(row);
    }
    j["weights"] = w;
    j["shift"] = std::vector<double>(c.action->shift().data(), c.action->shift().data() + c.action->g());
  }
  json probes = json::array();
  for (const ProbeSpec& p : c.probes) {
    json q;
    q["id"] = p.id;
    if (p.coords)
      for (Eigen::Index i = 0; i < p.coords->size(); ++i) q["coords"].push_back({hex((*p.coords)(i).real()), hex((*p.coords)(i).imag())});
    if (p.on) q["on"] = *p.on;
    for (Eigen::Index i = 0; i < p.w.size(); ++i) q["w"].push_back({hex(p.w(i).real()), hex(p.w(i).imag())});
    q["adapted"] = p.adapted_frame;
    probes.push_back(q);
  }
  j["probes"] = probes;
  j["quadrature"] = {{"min_nodes", c.quadrature.min_nodes},
                     {"nodes_per_sqrt_k", c.quadrature.nodes_per_sqrt_k},
                     {"node_override", c.quadrature.node_override}};
  // FNV-1a, stable across platforms.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct ProbeContext {
  const ProbeSpec* spec = nullptr;
  BundlePoint x;
  HeisenbergChart chart;
  std::string base_key;
};

std::string base_key_of(const BundlePoint& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.coords().size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f%+.10fi ", x.coords()(i).real(), x.coords()(i).imag());
    s += buf;
  }
  return s;
}

std::string cache_key(const std::string& probe, long k, const std::vector<int>& varpi) {
  return probe + "|" + std::to_string(k) + "|" + varpi_str(varpi);
}

class ValueCache {
 public:
  ValueCache(std::filesystem::path file, bool enabled) : file_(std::move(file)), enabled_(enabled) {
    if (!enabled_ || !std::filesystem::exists(file_)) return;
    try {
      std::ifstream in(file_);
      json j = json::parse(in);
      for (auto it = j.at("values").begin(); it != j.at("values").end(); ++it)
        map_[it.key()] = cplx(std::strtod(it.value()[0].get<std::string>().c_str(), nullptr),
                              std::strtod(it.value()[1].get<std::string>().c_str(), nullptr));
    } catch (const std::exception&) {
      map_.clear();  // a damaged cache is ignored and rewritten
    }
  }
  std::optional<cplx> get(const std::string& key) const {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void put(const std::string& key, cplx v) {
    std::lock_guard<std::mutex> lk(mu_);
    map_[key] = v;
  }
  void save(const std::string& hash) const {
    if (!enabled_) return;
    std::filesystem::create_directories(file_.parent_path());
    json j;
    j["config_hash"] = hash;
    j["values"] = json::object();
    for (const auto& [k, v] : map_) j["values"][k] = {hex(v.real()), hex(v.imag())};
    std::ofstream(file_) << j.dump(1) << "\n";
  }

 private:
  std::filesystem::path file_;
  bool enabled_;
  mutable std::mutex mu_;
  std::map<std::string, cplx> map_;
};

struct Task {
  int probe = -1;  // -1 for the pairing sequence
  int varpi = -1;
  long k = 0;
};

std::string fmt_num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

}  // namespace

ResultSet run(const ExperimentConfig& cfg, const RunOptions& opt) {
  validate(cfg);
  const LegendrianImmersion L = cfg.legendrian.build();
  const std::optional<LegendrianImmersion> Sigma =
      cfg.pairing_sigma ? std::optional<LegendrianImmersion>(cfg.pairing_sigma->build()) : std::nullopt;
  const std::vector<long> ks = cfg.ks();
  const std::filesystem::path out = opt.out_dir.empty() ? std::filesystem::path(cfg.output_dir) : opt.out_dir;

  ResultSet rs;
  rs.experiment_id = cfg.id;
  rs.config_hash = config_hash(cfg);
  auto line = [&](const std::string& s) { rs.report_lines.push_back(s); };
  auto verdict = [&](bool ok, const std::string& s) {
    rs.all_passed = rs.all_passed && ok;
    line(std::string(ok ? "PASS " : "FAIL ") + s);
  };
  line("experiment " + cfg.id + "  config hash " + rs.config_hash + "  normalization " + cfg.normalization);
  line("legendrian " + L.name() + "  k in [" + std::to_string(ks.front()) + ", " + std::to_string(ks.back()) + "], " +
       std::to_string(ks.size()) + " values");

  if (cfg.action) {
    TransversalityReport tr = transversality_check(L, *cfg.action);
    std::string msg = "transversality: expected dim " + std::to_string(tr.expected_dim) + ", estimated dim " +
                      std::to_string(tr.estimated_dim) + ", " + std::to_string(tr.points.size()) + " points";
    for (const std::string& p : tr.problems) msg += "; " + p;
    verdict(tr.ok, msg);
  }

  std::vector<ProbeContext> probes;
  for (const ProbeSpec& p : cfg.probes) {
    ProbeContext pc;
    pc.spec = &p;
    if (p.on) {
      Vec t = Eigen::Map<const Vec>(p.on->data(), static_cast<Eigen::Index>(p.on->size()));
      pc.x = L.point(t);
      pc.chart = p.adapted_frame ? adapted_chart(L, t) : heisenberg_chart(pc.x);
      if (p.adapted_frame) pc.x = pc.chart.center();
    } else {
      pc.x = BundlePoint::normalized(*p.coords);
      pc.chart = heisenberg_chart(pc.x);
    }
    pc.base_key = base_key_of(pc.x);
    probes.push_back(pc);
  }

  const int nv = cfg.action ? static_cast<int>(cfg.varpi_list.size()) : 1;
  auto varpi_vec = [&](int vi) {
    std::vector<int> v;
    if (cfg.action) v.assign(cfg.varpi_list[vi].data(), cfg.varpi_list[vi].data() + cfg.varpi_list[vi].size());
    return v;
  };

  std::vector<Task> tasks;
  for (size_t p = 0; p < probes.size(); ++p)
    for (int v = 0; v < nv; ++v)
      for (long k : ks) tasks.push_back({static_cast<int>(p), v, k});
  if (Sigma)
    for (int v = 0; v < nv; ++v)
      for (long k : ks) tasks.push_back({-1, v, k});

  ValueCache cache(out / "cache" / (rs.config_hash + ".json"), opt.use_cache);
  QuadratureOptions q = cfg.quadrature;
  q.threads = 1;
  std::vector<ResultRecord> recs(tasks.size());
  parallel_blocks(static_cast<int>(tasks.size()), std::max(1, opt.threads), [&](int i) {
    const Task& t = tasks[i];
    ResultRecord& r = recs[i];
    r.experiment_id = cfg.id;
    r.k = t.k;
    r.varpi = varpi_vec(t.varpi);
    r.probe_id = t.probe < 0 ? "pairing" : probes[t.probe].spec->id;
    if (t.probe >= 0) {
      r.w_norm = probes[t.probe].spec->w.norm();
      r.base_key = probes[t.probe].base_key;
    }
    const std::string key = cache_key(r.probe_id, t.k, r.varpi);
    if (auto hit = cache.get(key)) {
      r.value = *hit;
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (t.probe < 0) {
        std::optional<TorusAction> act = cfg.action;
        r.value = hermitian_product(L, *Sigma, t.k, act, cfg.action ? cfg.varpi_list[t.varpi] : Eigen::VectorXi(), q);
      } else {
        const ProbeContext& pc = probes[t.probe];
        const BundlePoint y = pc.spec->w.size() ? displace(pc.chart, pc.spec->w, static_cast<double>(t.k)) : pc.x;
        r.value = cfg.action ? compute_u_k_varpi(L, *cfg.action, cfg.varpi_list[t.varpi], t.k, y, q)
                             : compute_u_k(L, t.k, y, q);
      }
      cache.put(key, r.value);
    } catch (const std::exception& e) {
      r.error = "probe " + r.probe_id + ", k = " + std::to_string(t.k) + ": " + e.what();
    }
    r.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  cache.save(rs.config_hash);

  // Predictions and per-sequence analysis, serialized.
  auto analyse = [&](const std::string& pid, int vi, const std::optional<LeadingTermPrediction>& pred,
                     bool check_fit) {
    std::vector<ResultRecord*> seq_recs;
    for (ResultRecord& r : recs)
      if (r.probe_id == pid && r.varpi == varpi_vec(vi)) seq_recs.push_back(&r);
    std::string tag = pid + (cfg.action ? " varpi=(" + varpi_str(varpi_vec(vi)) + ")" : "");
    StateSequence seq;
    int errors = 0;
    for (ResultRecord* r : seq_recs) {
      if (!r->error.empty()) {
        ++errors;
        continue;
      }
      seq.values[r->k] = r->value;
      if (pred) {
        r->predicted = pred->value(r->k);
        r->has_prediction = true;
      }
    }
    if (errors) verdict(false, tag + ": " + std::to_string(errors) + " evaluations failed");
    if (seq.values.empty()) return;
    if (pred) {
      double worst = 0.0;
      double worst_zero = 0.0;
      int compared = 0, zeros = 0;
      for (const auto& [k, v] : seq.values) {
        if (k < cfg.thresholds.compare_k_min) continue;
        const cplx pv = pred->value(k);
        const double scale = std::pow(static_cast<double>(k), pred->exponent);
        double amp = 0.0;
        for (const ReturnTerm& term : pred->per_return_terms) amp += std::abs(term.amplitude);
        if (std::abs(pv) <= 1e-9 * scale * amp) {
          ++zeros;
          worst_zero = std::max(worst_zero, std::abs(v));
        } else {
          ++compared;
          worst = std::max(worst, std::abs(std::abs(v) / std::abs(pv) - 1.0));
        }
      }
      if (compared)
        verdict(worst <= cfg.thresholds.prediction_rel_tol,
                tag + ": |value| vs leading term, max relative deviation " + fmt_num(worst) + " over " +
                    std::to_string(compared) + " k (tolerance " + fmt_num(cfg.thresholds.prediction_rel_tol) + ")");
      if (zeros)
        verdict(worst_zero <= cfg.thresholds.zero_abs_tol,
                tag + ": leading term vanishes at " + std::to_string(zeros) + " k, max |value| " + fmt_num(worst_zero) +
                    " (tolerance " + fmt_num(cfg.thresholds.zero_abs_tol) + ")");
      // Divide out the full interference pattern, scaled to unit total amplitude.
      double amp_total = 0.0;
      for (const ReturnTerm& term : pred->per_return_terms) amp_total += std::abs(term.amplitude);
      AsymptoticFit fit = fit_power_law(seq, [&](long k) { return pred->coefficient(k) / amp_total; });
      if (fit.kind == FitKind::PowerLaw) {
        line("     " + tag + ": fitted exponent " + fmt_num(fit.exponent) + ", coefficient " +
             fmt_num(fit.coefficient_modulus) + " (interference pattern divided out), predicted exponent " +
             fmt_num(pred->exponent));
      } else {
        line("     " + tag + ": no power-law fit (" + fit.message + ")");
      }
      if (check_fit) {
        // Fitted without a phase pattern, on the raw moduli.
        AsymptoticFit raw = fit_power_law(seq);
        double tail = 0.0;
        int nt = 0;
        const size_t skip = seq.values.size() * 3 / 4;
        size_t idx = 0;
        for (const auto& [k, v] : seq.values)
          if (idx++ >= skip) {
            tail += std::abs(v) / std::pow(static_cast<double>(k), pred->exponent);
            ++nt;
          }
        tail /= std::max(1, nt);
        line("     " + tag + ": raw fit exponent " + fmt_num(raw.exponent) + ", coefficient " +
             fmt_num(raw.coefficient_modulus) + "; tail |u_k|/k^" + fmt_num(pred->exponent) + " = " + fmt_num(tail));
        const ReportThresholds& th = cfg.thresholds;
        if (th.expect_exponent)
          verdict(raw.kind == FitKind::PowerLaw && std::fabs(raw.exponent - *th.expect_exponent) <= *th.exponent_tol,
                  tag + ": fitted exponent " + fmt_num(raw.exponent) + " vs " + fmt_num(*th.expect_exponent));
        if (th.expect_coefficient)
          verdict(std::fabs(tail / *th.expect_coefficient - 1.0) <= *th.coefficient_tol,
                  tag + ": coefficient " + fmt_num(tail) + " vs " + fmt_num(*th.expect_coefficient));
      }
    } else {
      RapidDecayReport rd = rapid_decay_test(seq, cfg.thresholds.rapid_decay_n_max, cfg.thresholds.rapid_decay_drop,
                                           cfg.thresholds.noise_floor);
      verdict(rd.passed, tag + ": no leading term (off the orbit saturation); rapid decay test with N_max = " +
                             std::to_string(cfg.thresholds.rapid_decay_n_max) + ": " + rd.message);
    }
  };

  for (const ProbeContext& pc : probes) {
    for (int v = 0; v < nv; ++v) {
      std::optional<LeadingTermPrediction> pred;
      try {
        const std::optional<HeisenbergChart> ch = pc.chart;
        pred = cfg.action ? predict_theorem_main(pc.x, L, *cfg.action, cfg.varpi_list[v], pc.spec->w, ch)
                          : predict_action_free(pc.x, L, pc.spec->w, ch);
      } catch (const GeometryError& e) {
        line("     " + pc.spec->id + ": " + e.what());
      }
      analyse(pc.spec->id, v, pred, pc.spec->check_fit && pc.spec->w.size() == 0);
    }
  }
  if (Sigma) {
    for (int v = 0; v < nv; ++v) {
      std::optional<LeadingTermPrediction> pred;
      try {
        pred = predict_pairing_transverse(L, *Sigma, cfg.action, cfg.action ? cfg.varpi_list[v] : Eigen::VectorXi());
        if (pred->per_return_terms.empty()) pred.reset();
      } catch (const Error& e) {
        line("     pairing: " + std::string(e.what()));
      }
      analyse("pairing", v, pred, false);
    }
  }
  line(std::string("overall: ") + (rs.all_passed ? "PASS" : "FAIL"));
  rs.records = std::move(recs);
  write_results(rs, out);
  return rs;
}

void write_results(const ResultSet& rs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "results.csv");
    csv << "experiment_id,probe_id,k,varpi,re,im,abs,pred_re,pred_im,pred_abs,w_norm,error\n";
    for (const ResultRecord& r : rs.records) {
      csv << r.experiment_id << ',' << r.probe_id << ',' << r.k << ',' << varpi_str(r.varpi) << ','
          << g17(r.value.real()) << ',' << g17(r.value.imag()) << ',' << g17(std::abs(r.value)) << ',';
      if (r.has_prediction)
        csv << g17(r.predicted.real()) << ',' << g17(r.predicted.imag()) << ',' << g17(std::abs(r.predicted));
      else
        csv << ",,";
      csv << ',' << g17(r.w_norm) << ',' << (r.error.empty() ? "" : "\"" + r.error + "\"") << '\n';
    }
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment_id"] = rs.experiment_id;
  j["config_hash"] = rs.config_hash;
  j["all_passed"] = rs.all_passed;
  j["records"] = json::array();
  json timing = json::array();
  for (const ResultRecord& r : rs.records) {
    json o;
    o["probe_id"] = r.probe_id;
    o["k"] = r.k;
    o["varpi"] = r.varpi;
    o["value"] = {r.value.real(), r.value.imag()};
    if (r.has_prediction) o["predicted"] = {r.predicted.real(), r.predicted.imag()};
    o["w_norm"] = r.w_norm;
    o["base_key"] = r.base_key;
    if (!r.error.empty()) o["error"] = r.error;
    j["records"].push_back(o);
    timing.push_back({{"probe_id", r.probe_id}, {"k", r.k}, {"varpi", r.varpi}, {"ms", r.timing_ms}});
  }
  j["report"] = rs.report_lines;
  std::ofstream(dir / "results.json") << j.dump(1) << "\n";
  std::ofstream(dir / "timing.json") << timing.dump(1) << "\n";
  std::ofstream rep(dir / "report.txt");
  for (const std::string& s : rs.report_lines) rep << s << "\n";
}

ResultSet read_results(const std::filesystem::path& dir) {
  std::ifstream in(dir / "results.json");
  if (!in) throw Error("no results.json in " + dir.string());
  json j = json::parse(in);
  if (j.at("schema_version").get<int>() != kSchemaVersion) throw Error("results.json: unsupported schema version");
  ResultSet rs;
  rs.experiment_id = j.at("experiment_id").get<std::string>();
  rs.config_hash = j.at("config_hash").get<std::string>();
  rs.all_passed = j.at("all_passed").get<bool>();
  for (const json& o : j.at("records")) {
    ResultRecord r;
    r.experiment_id = rs.experiment_id;
    r.probe_id = o.at("probe_id").get<std::string>();
    r.k = o.at("k").get<long>();
    r.varpi = o.at("varpi").get<std::vector<int>>();
    r.value = {o.at("value")[0].get<double>(), o.at("value")[1].get<double>()};
    if (o.contains("predicted")) {
      r.predicted = {o.at("predicted")[0].get<double>(), o.at("predicted")[1].get<double>()};
      r.has_prediction = true;
    }
    r.w_norm = o.at("w_norm").get<double>();
    r.base_key = o.at("base_key").get<std::string>();
    if (o.contains("error")) r.error = o.at("error").get<std::string>();
    rs.records.push_back(r);
  }
  for (const json& s : j.at("report")) rs.report_lines.push_back(s.get<std::string>());
  return rs;
}

std::filesystem::path emit_plot_data(const ResultSet& rs, const std::string& kind, const std::filesystem::path& dir) {
  if (kind != "growth" && kind != "profile" && kind != "pairing" && kind != "decay")
    throw Error("unknown plot kind '" + kind + "' (growth, profile, pairing, decay)");
  if (rs.records.empty()) throw Error("emit_plot_data: empty result set");
  std::filesystem::create_directories(dir);
  const std::filesystem::path file = dir / (kind + ".csv");
  std::ostringstream os;
  int rows = 0;
  if (kind == "growth") {
    os << "# k: level; abs_u: |u_k| computed by quadrature; abs_pred: modulus of the leading term; ratio: abs_u/abs_pred\n";
    os << "probe_id,varpi,k,abs_u,abs_pred,ratio\n";
    for (const ResultRecord& r : rs.records) {
      if (!r.has_prediction || r.w_norm != 0.0 || r.probe_id == "pairing" || !r.error.empty()) continue;
      const double ap = std::abs(r.predicted);
      os << r.probe_id << ',' << varpi_str(r.varpi) << ',' << r.k << ',' << g17(std::abs(r.value)) << ',' << g17(ap)
         << ',' << (ap > 0 ? g17(std::abs(r.value) / ap) : "") << '\n';
      ++rows;
    }
  } else if (kind == "profile") {
    os << "# w_norm: |w|; ratio: |u_k(x + w/sqrt k)| / |u_k(x)|; gaussian: the same ratio of leading terms, e^{-S}\n";
    os << "probe_id,varpi,k,w_norm,ratio,gaussian\n";
    std::map<std::string, const ResultRecord*> base;
    for (const ResultRecord& r : rs.records)
      if (r.w_norm == 0.0 && r.error.empty()) base[r.base_key + "|" + varpi_str(r.varpi) + "|" + std::to_string(r.k)] = &r;
    for (const ResultRecord& r : rs.records) {
      if (r.w_norm == 0.0 || !r.error.empty()) continue;
      auto it = base.find(r.base_key + "|" + varpi_str(r.varpi) + "|" + std::to_string(r.k));
      if (it == base.end() || std::abs(it->second->value) == 0.0) continue;
      const ResultRecord& b = *it->second;
      os << r.probe_id << ',' << varpi_str(r.varpi) << ',' << r.k << ',' << g17(r.w_norm) << ','
         << g17(std::abs(r.value) / std::abs(b.value)) << ',';
      if (r.has_prediction && b.has_prediction && std::abs(b.predicted) > 0)
        os << g17(std::abs(r.predicted) / std::abs(b.predicted));
      os << '\n';
      ++rows;
    }
  } else if (kind == "pairing") {
    os << "# k: level; re, im, abs: the pairing (u_k, v_k); abs_pred: modulus of the leading term; ratio: abs/abs_pred\n";
    os << "varpi,k,re,im,abs,abs_pred,ratio\n";
    for (const ResultRecord& r : rs.records) {
      if (r.probe_id != "pairing" || !r.error.empty()) continue;
      const double ap = r.has_prediction ? std::abs(r.predicted) : 0.0;
      os << varpi_str(r.varpi) << ',' << r.k << ',' << g17(r.value.real()) << ',' << g17(r.value.imag()) << ','
         << g17(std::abs(r.value)) << ',' << (r.has_prediction ? g17(ap) : "") << ','
         << (ap > 0 ? g17(std::abs(r.value) / ap) : "") << '\n';
      ++rows;
    }
  } else {
    os << "# k: level; abs_u: |u_k|; abs_u_k5: |u_k| k^5, tends to 0 under rapid decay\n";
    os << "probe_id,varpi,k,abs_u,abs_u_k5\n";
    for (const ResultRecord& r : rs.records) {
      if (r.has_prediction || r.probe_id == "pairing" || !r.error.empty()) continue;
      os << r.probe_id << ',' << varpi_str(r.varpi) << ',' << r.k << ',' << g17(std::abs(r.value)) << ','
         << g17(std::abs(r.value) * std::pow(static_cast<double>(r.k), 5)) << '\n';
      ++rows;
    }
  }
  if (rows == 0) throw Error("emit_plot_data: no records of kind '" + kind + "'");
  std::ofstream(file) << os.str();
  return file;
}

}  // namespace szl
