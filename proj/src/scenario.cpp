#include "minsub/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <toml.hpp>

#include "minsub/errors.hpp"
#include "minsub/flow.hpp"
#include "minsub/geometry.hpp"
#include "minsub/graph_pde.hpp"
#include "minsub/submanifold.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace minsub {

const char* const kExperiments[7] = {"classify",  "formula_check", "graph_solve", "dirichlet",
                                     "flow",      "ball_threshold", "normal_growth"};

int exit_code_for(int code) {
  switch (static_cast<ErrorCode>(code)) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownModel:
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidArgument:
      return 2;
    default:
      return 1;
  }
}

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::ConfigError, msg); }

// A TOML table that remembers which keys were read, so that leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return t_ && t_->contains(key); }

  const toml::node* node(const std::string& key) {
    used_.insert(key);
    return t_ ? t_->get(key) : nullptr;
  }
  const toml::node& required(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) config_error("missing key '" + key_path(key) + "'");
    return *n;
  }

  double num(const std::string& key, double def) {
    const toml::node* n = node(key);
    return n ? as_number(*n, key) : def;
  }
  double num(const std::string& key) { return as_number(required(key), key); }

  long long integer(const std::string& key, long long def) {
    const toml::node* n = node(key);
    if (!n) return def;
    if (auto v = n->value<long long>(); v && n->is_integer()) return *v;
    config_error("key '" + key_path(key) + "' must be an integer");
  }

  bool boolean(const std::string& key, bool def) {
    const toml::node* n = node(key);
    if (!n) return def;
    if (auto v = n->value<bool>()) return *v;
    config_error("key '" + key_path(key) + "' must be true or false");
  }

  std::string str(const std::string& key, const std::string& def) {
    const toml::node* n = node(key);
    return n ? as_string(*n, key) : def;
  }
  std::string str(const std::string& key) { return as_string(required(key), key); }

  std::vector<double> numbers(const std::string& key) {
    return number_list(required(key), key_path(key));
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const toml::node* n = node(key);
    return n ? number_list(*n, key_path(key)) : def;
  }

  Section table(const std::string& key) {
    const toml::node& n = required(key);
    if (!n.is_table()) config_error("key '" + key_path(key) + "' must be a table");
    return Section(n.as_table(), key_path(key));
  }
  std::optional<Section> optional_table(const std::string& key) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return table(key);
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      const std::string key(k.str());
      if (!used_.count(key)) config_error("unknown key '" + key_path(key) + "'");
    }
  }

  static std::vector<double> number_list(const toml::node& n, const std::string& where) {
    const toml::array* arr = n.as_array();
    if (!arr) config_error("key '" + where + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
      auto v = e.value<double>();
      if (!v) config_error("key '" + where + "' must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

 private:
  double as_number(const toml::node& n, const std::string& key) const {
    if (auto v = n.value<double>()) return *v;
    config_error("key '" + key_path(key) + "' must be a number");
  }
  std::string as_string(const toml::node& n, const std::string& key) const {
    if (auto v = n.value<std::string>()) return *v;
    config_error("key '" + key_path(key) + "' must be a string");
  }

  const toml::table* t_;
  std::string path_;
  std::set<std::string> used_;
};

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ScalarFunction parse_function(Section s) {
  const std::string kind = s.str("kind");
  ScalarFunction f;
  if (kind == "constant") {
    f = ScalarFunction::constant(s.num("value"));
  } else if (kind == "affine") {
    f = ScalarFunction::affine(s.num("slope"), s.num("intercept", 0.0));
  } else if (kind == "power") {
    f = ScalarFunction::power(s.num("scale", 1.0), s.num("exponent"), s.num("shift", 0.0),
                              s.num("offset", 0.0));
  } else if (kind == "exp") {
    f = ScalarFunction::exp(s.num("scale", 1.0), s.num("rate", 1.0));
  } else if (kind == "cosh") {
    f = ScalarFunction::cosh(s.num("scale", 1.0), s.num("rate", 1.0), s.num("shift", 0.0));
  } else if (kind == "sinh") {
    f = ScalarFunction::sinh(s.num("scale", 1.0), s.num("rate", 1.0));
  } else if (kind == "sin") {
    f = ScalarFunction::sin(s.num("scale", 1.0), s.num("rate", 1.0), s.num("phase", 0.0),
                            s.num("offset", 0.0));
  } else if (kind == "spline") {
    f = ScalarFunction::spline(s.numbers("knots"), s.numbers("values"));
  } else if (kind == "sum") {
    const toml::node& n = s.required("terms");
    const toml::array* arr = n.as_array();
    if (!arr) config_error("key '" + s.key_path("terms") + "' must be an array of tables");
    std::vector<ScalarFunction> terms;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::table* t = arr->get(i)->as_table();
      if (!t) config_error("key '" + s.key_path("terms") + "' must be an array of tables");
      terms.push_back(parse_function(Section(t, s.key_path("terms") + "[" + std::to_string(i) + "]")));
    }
    f = ScalarFunction::sum(std::move(terms));
  } else {
    config_error("key '" + s.key_path("kind") + "': unknown function kind '" + kind + "'");
  }
  s.finish();
  return f;
}

MetricFamily parse_metric(Section m) {
  ModelSpec spec;
  spec.model = m.str("model");
  if (m.has("params")) {
    const toml::table* t = m.node("params")->as_table();
    if (!t) config_error("key '" + m.key_path("params") + "' must be a table");
    for (const auto& [k, v] : *t) {
      auto x = v.value<double>();
      if (!x) config_error("key '" + m.key_path("params") + "." + std::string(k.str()) + "' must be a number");
      spec.params[std::string(k.str())] = *x;
    }
  }
  if (m.has("functions")) {
    const toml::table* t = m.node("functions")->as_table();
    if (!t) config_error("key '" + m.key_path("functions") + "' must be a table");
    for (const auto& [k, v] : *t) {
      const std::string name(k.str());
      const std::string where = m.key_path("functions") + "." + name;
      std::vector<ScalarFunction> list;
      if (const toml::table* ft = v.as_table()) {
        list.push_back(parse_function(Section(ft, where)));
      } else if (const toml::array* arr = v.as_array()) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
          const toml::table* ft2 = arr->get(i)->as_table();
          if (!ft2) config_error("key '" + where + "' must hold function tables");
          list.push_back(parse_function(Section(ft2, where + "[" + std::to_string(i) + "]")));
        }
      } else {
        config_error("key '" + where + "' must be a function table or an array of them");
      }
      spec.functions[name] = std::move(list);
    }
  }
  MetricFamily fam = model_metric(spec);
  const std::string mode = m.str("mode", "analytic");
  if (mode == "finite_difference") {
    fam = fam.with_mode(DerivativeMode::FiniteDifference);
  } else if (mode != "analytic") {
    config_error("key '" + m.key_path("mode") + "' must be 'analytic' or 'finite_difference'");
  }
  const long long product = m.integer("product", 0);
  if (product < 0 || product > 3) config_error("key '" + m.key_path("product") + "' must be 0 to 3");
  for (long long i = 0; i < product; ++i) fam = product_extension(fam);
  if (m.has("collar")) fam = fam.with_collar(m.num("collar"));
  m.finish();
  return fam;
}

FlowPolicy parse_policy(std::optional<Section> s, std::uint64_t seed) {
  FlowPolicy p;
  p.seed = seed;
  if (!s) return p;
  p.dt0 = s->num("dt0", p.dt0);
  p.max_steps = static_cast<int>(s->integer("max_steps", p.max_steps));
  p.residual_tolerance = s->num("residual_tolerance", p.residual_tolerance);
  p.collapse_fraction = s->num("collapse_fraction", p.collapse_fraction);
  p.collapse_spread = s->num("collapse_spread", p.collapse_spread);
  const std::string pre = s->str("preconditioner", "sobolev");
  if (pre == "l2") {
    p.preconditioner = Preconditioner::L2;
  } else if (pre == "sobolev") {
    p.preconditioner = Preconditioner::Sobolev;
  } else {
    config_error("key '" + s->key_path("preconditioner") + "' must be 'l2' or 'sobolev'");
  }
  p.sobolev_weight = s->num("sobolev_weight", p.sobolev_weight);
  p.max_restarts = static_cast<int>(s->integer("max_restarts", p.max_restarts));
  p.redistribute_ratio = s->num("redistribute_ratio", p.redistribute_ratio);
  p.record_every = static_cast<int>(s->integer("record_every", p.record_every));
  if (auto b = s->optional_table("ball")) {
    Ball ball;
    ball.center = to_vec(b->numbers("center"));
    ball.radius = b->num("radius");
    ball.pole = b->boolean("pole", false);
    b->finish();
    p.ball = ball;
  }
  if (p.max_steps < 1) config_error("key '" + s->key_path("max_steps") + "' must be at least 1");
  s->finish();
  return p;
}

std::vector<std::tuple<int, double, double>> random_modes(std::mt19937_64& rng, int count) {
  std::vector<std::tuple<int, double, double>> modes;
  for (int k = 1; k <= count; ++k)
    modes.emplace_back(k + 1, 2.0 * unit_draw(rng) - 1.0, 2.0 * kPi * unit_draw(rng));
  return modes;
}

DiscreteImmersion parse_curve(Section c, const MetricFamily& fam, std::uint64_t seed,
                              const fs::path& base) {
  const std::string kind = c.str("kind");
  DiscreteImmersion imm;
  if (kind == "seed") {
    SeedSpec s;
    s.center = to_vec(c.numbers("center"));
    s.pole = c.boolean("pole", false);
    s.level = c.num("level");
    s.amplitude = c.num("amplitude", 0.0);
    s.vertices = static_cast<int>(c.integer("vertices", 64));
    if (c.has("modes")) {
      const toml::array* arr = c.node("modes")->as_array();
      if (!arr) config_error("key '" + c.key_path("modes") + "' must be an array of [k, a, phase]");
      for (const auto& e : *arr) {
        auto t = Section::number_list(e, c.key_path("modes"));
        if (t.size() != 3) config_error("key '" + c.key_path("modes") + "' entries need 3 numbers");
        s.modes.emplace_back(static_cast<int>(t[0]), t[1], t[2]);
      }
    } else if (s.amplitude > 0.0) {
      std::mt19937_64 rng(seed);
      s.modes = random_modes(rng, 3);
    }
    if (s.center.size() != fam.dim()) config_error("key '" + c.key_path("center") + "' has the wrong length");
    imm = make_seed(fam, s);
  } else if (kind == "latitude") {
    const double level = c.num("level");
    const double amp = c.num("amplitude", 0.0);
    const int mode = static_cast<int>(c.integer("mode", 1));
    const double phase = c.num("phase", 0.0);
    const int n = static_cast<int>(c.integer("vertices", 64));
    std::vector<double> rest = c.numbers("fiber", {});
    if (fam.fiber_dim() < 1 || !fam.axes()[0].periodic)
      config_error("key '" + c.key_path("kind") + "': latitude needs a periodic first fiber axis");
    if (static_cast<int>(rest.size()) != fam.fiber_dim() - 1)
      config_error("key '" + c.key_path("fiber") + "' must give the remaining fiber coordinates");
    if (n < 3) config_error("key '" + c.key_path("vertices") + "' must be at least 3");
    const Axis ax = fam.axes()[0];
    std::vector<Vec> verts;
    for (int i = 0; i < n; ++i) {
      const double x = ax.lo + (ax.hi - ax.lo) * i / n;
      Vec p(fam.dim());
      p[0] = level + amp * std::cos(mode * 2.0 * kPi * i / n + phase);
      p[1] = x;
      for (std::size_t k = 0; k < rest.size(); ++k) p[2 + static_cast<int>(k)] = rest[k];
      verts.push_back(p);
    }
    imm = DiscreteImmersion::closed_curve(verts);
  } else if (kind == "segment") {
    const Vec a = to_vec(c.numbers("from")), b = to_vec(c.numbers("to"));
    const double bow = c.num("bow", 0.0);
    const int n = static_cast<int>(c.integer("vertices", 64));
    if (a.size() != fam.dim() || b.size() != fam.dim())
      config_error("key '" + c.key_path("from") + "' and 'to' need " + std::to_string(fam.dim()) + " numbers");
    if (n < 3) config_error("key '" + c.key_path("vertices") + "' must be at least 3");
    std::vector<Vec> verts;
    for (int i = 0; i < n; ++i) {
      const double s = double(i) / (n - 1);
      Vec p = a + s * (b - a);
      p[0] += bow * std::sin(kPi * s);
      verts.push_back(p);
    }
    imm = DiscreteImmersion::open_curve(verts);
  } else if (kind == "file") {
    fs::path p = c.str("path");
    if (p.is_relative()) p = base / p;
    imm = DiscreteImmersion::load(p.string());
    if (imm.ambient_dim() != fam.dim()) config_error("key '" + c.key_path("path") + "': dimension differs from the metric");
  } else {
    config_error("key '" + c.key_path("kind") + "': unknown curve kind '" + kind + "'");
  }
  c.finish();
  return imm;
}

Grid parse_grid(Section g) {
  const toml::node& n = g.required("axes");
  const toml::array* arr = n.as_array();
  if (!arr) config_error("key '" + g.key_path("axes") + "' must be an array of tables");
  Grid grid;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const toml::table* t = arr->get(i)->as_table();
    if (!t) config_error("key '" + g.key_path("axes") + "' must be an array of tables");
    Section a(t, g.key_path("axes") + "[" + std::to_string(i) + "]");
    GridAxis ax;
    ax.n = static_cast<int>(a.integer("n", 0));
    ax.lo = a.num("lo");
    ax.hi = a.num("hi");
    ax.periodic = a.boolean("periodic", false);
    ax.drift = a.num("drift", 0.0);
    a.finish();
    grid.axes.push_back(ax);
  }
  g.finish();
  try {
    grid.validate();
  } catch (const Error& e) {
    config_error("grid: " + std::string(e.what()));
  }
  return grid;
}

struct FieldSpec {
  std::string kind = "constant";
  double mean = 0.0, amplitude = 0.0, phase = 0.0;
  int mode = 1;
};

FieldSpec parse_field_spec(Section s) {
  FieldSpec f;
  f.kind = s.str("kind", "constant");
  if (f.kind == "constant") {
    f.mean = s.num("value", 0.0);
  } else if (f.kind == "sine") {
    f.mean = s.num("mean", 0.0);
    f.amplitude = s.num("amplitude");
    f.mode = static_cast<int>(s.integer("mode", 1));
    f.phase = s.num("phase", 0.0);
  } else {
    config_error("key '" + s.key_path("kind") + "' must be 'constant' or 'sine'");
  }
  s.finish();
  return f;
}

// mean + amplitude * prod_i sin(mode * 2 pi (x_i - lo_i) / L_i + phase)
ManufacturedField manufactured(const FieldSpec& f, const Grid& grid) {
  std::vector<double> k, lo;
  for (const auto& ax : grid.axes) {
    k.push_back(f.mode * 2.0 * kPi / (ax.hi - ax.lo));
    lo.push_back(ax.lo);
  }
  const int d = grid.dim();
  auto parts = [=](const Vec& x, std::vector<double>& s, std::vector<double>& c) {
    s.resize(d);
    c.resize(d);
    for (int i = 0; i < d; ++i) {
      s[i] = std::sin(k[i] * (x[i] - lo[i]) + f.phase);
      c[i] = std::cos(k[i] * (x[i] - lo[i]) + f.phase);
    }
  };
  auto prod_except = [d](const std::vector<double>& s, int a, int b) {
    double p = 1.0;
    for (int i = 0; i < d; ++i)
      if (i != a && i != b) p *= s[i];
    return p;
  };
  ManufacturedField m;
  m.value = [=](const Vec& x) {
    std::vector<double> s, c;
    parts(x, s, c);
    return f.mean + f.amplitude * prod_except(s, -1, -1);
  };
  m.gradient = [=](const Vec& x) {
    std::vector<double> s, c;
    parts(x, s, c);
    Vec g(d);
    for (int i = 0; i < d; ++i) g[i] = f.amplitude * k[i] * c[i] * prod_except(s, i, -1);
    return g;
  };
  m.hessian = [=](const Vec& x) {
    std::vector<double> s, c;
    parts(x, s, c);
    Mat h(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        h(i, j) = i == j ? -f.amplitude * k[i] * k[i] * prod_except(s, -1, -1)
                         : f.amplitude * k[i] * k[j] * c[i] * c[j] * prod_except(s, i, j);
    return h;
  };
  return m;
}

GraphField sample_field(const ManufacturedField& m, const Grid& grid, const std::string& family_id) {
  GraphField f;
  f.grid = grid;
  f.family_id = family_id;
  f.u.resize(grid.size());
  for (int i = 0; i < grid.size(); ++i) f.u[i] = m.value(grid.coords(i));
  return f;
}

Specialization parse_specialization(const std::string& name, const std::string& where) {
  if (name == "euclidean") return Specialization::Euclidean;
  if (name == "warped") return Specialization::Warped;
  if (name == "killing") return Specialization::Killing;
  if (name == "doubly_warped") return Specialization::DoublyWarped;
  config_error("key '" + where + "': unknown specialization '" + name + "'");
}

SignConstraint parse_sign(const std::string& s, const std::string& where) {
  if (s == "free") return SignConstraint::Free;
  if (s == "at_least") return SignConstraint::AtLeast;
  if (s == "at_most") return SignConstraint::AtMost;
  config_error("key '" + where + "' must be 'free', 'at_least' or 'at_most'");
}

NewtonOptions parse_newton(std::optional<Section> s, const ScenarioOverrides& ov) {
  NewtonOptions o;
  if (s) {
    o.tolerance = s->num("tolerance", o.tolerance);
    o.max_iterations = static_cast<int>(s->integer("max_iterations", o.max_iterations));
    o.pin_node = static_cast<int>(s->integer("pin_node", o.pin_node));
    o.sign = parse_sign(s->str("sign", "free"), s->key_path("sign"));
    o.bound = s->num("bound", o.bound);
    o.flatness = s->num("flatness", o.flatness);
    s->finish();
  }
  if (ov.tolerance) o.tolerance = *ov.tolerance;
  return o;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) fail(ErrorCode::IoError, "cannot write " + p.string());
  os << text;
  if (!os) fail(ErrorCode::IoError, "write failed for " + p.string());
}

std::string field_csv(const GraphField& f) {
  std::ostringstream os;
  f.write_csv(os);
  return os.str();
}

std::string history_csv(const std::vector<double>& h) {
  std::string s = "iteration,residual_norm\n";
  for (std::size_t i = 0; i < h.size(); ++i) s += std::to_string(i) + "," + fmt17(h[i]) + "\n";
  return s;
}

// What an experiment hands back before the common envelope is added.
struct Outcome {
  json result;
  std::string headline;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
};

Outcome run_classify(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov) {
  Section c = root.table("classify");
  const toml::node& rn = c.required("region");
  const toml::array* arr = rn.as_array();
  if (!arr) config_error("key '" + c.key_path("region") + "' must be an array of [lo, hi]");
  Region region;
  for (const auto& e : *arr) {
    auto r = Section::number_list(e, c.key_path("region"));
    if (r.size() != 2) config_error("key '" + c.key_path("region") + "' entries need 2 numbers");
    region.ranges.emplace_back(r[0], r[1]);
  }
  if (static_cast<int>(region.ranges.size()) != fam.dim())
    config_error("key '" + c.key_path("region") + "' needs " + std::to_string(fam.dim()) + " ranges");
  const int samples = static_cast<int>(c.integer("samples", 9));
  double tol = c.num("tolerance", 1e-9);
  if (ov.tolerance) tol = *ov.tolerance;
  c.finish();
  const MonotonicityReport rep = classify_monotonicity(fam, region, samples, tol);
  Outcome out;
  json flags = json::array();
  for (const auto& n : rep.flags.names()) flags.push_back(n);
  json wit = json::array();
  std::string csv = "role,lambda_min,lambda_max,dbeta,point\n";
  for (const auto& w : rep.witnesses) {
    wit.push_back({{"role", w.role}, {"point", vec_json(w.point)}, {"lambda_min", w.lambda_min},
                   {"lambda_max", w.lambda_max}, {"dbeta", w.dbeta}});
    std::string pt;
    for (int i = 0; i < w.point.size(); ++i) pt += (i ? " " : "") + fmt17(w.point[i]);
    csv += w.role + "," + fmt17(w.lambda_min) + "," + fmt17(w.lambda_max) + "," + fmt17(w.dbeta) +
           "," + pt + "\n";
  }
  out.result = {{"flags", flags},
                {"samples_per_axis", rep.samples_per_axis},
                {"relative_tolerance", rep.relative_tolerance},
                {"tolerance", rep.tolerance},
                {"lambda_range", {rep.lambda_min, rep.lambda_max}},
                {"dbeta_range", {rep.dbeta_min, rep.dbeta_max}},
                {"witnesses", wit}};
  std::string names;
  for (const auto& n : rep.flags.names()) names += (names.empty() ? "" : ",") + n;
  out.headline = "flags {" + names + "}";
  out.files.emplace_back("witnesses.csv", csv);
  return out;
}

Outcome run_formula_check(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov,
                          std::uint64_t seed, const fs::path& base) {
  Section fc = root.table("formula_check");
  const std::string check = fc.str("check", "laplacian");
  Outcome out;
  if (check == "laplacian") {
    const bool flow_first = fc.boolean("flow_first", false);
    fc.finish();
    DiscreteImmersion imm = parse_curve(root.table("curve"), fam, seed, base);
    FlowPolicy policy = parse_policy(root.optional_table("flow"), seed);
    if (ov.tolerance) policy.residual_tolerance = *ov.tolerance;
    std::string verdict = "not_flowed";
    if (flow_first) {
      FlowTrace tr = run_flow(imm, fam, policy);
      verdict = verdict_name(tr.verdict);
      imm = tr.final_immersion;
    }
    const LaplacianTau lt = laplacian_tau(imm, fam);
    const TauTheta tt = tau_theta(imm, fam);
    const std::vector<double> lb = discrete_laplace_beltrami(imm, fam, tt.tau);
    const EtaDivY ed = eta_and_divY(imm, fam);
    double num = 0.0, den = 0.0, dy = 0.0;
    std::string csv = "vertex,tau,theta,laplacian,discrete_laplacian,div_y,div_y_direct\n";
    for (int i = 0; i < imm.size(); ++i) {
      if (!imm.is_boundary()[i]) {
        num = std::max(num, std::abs(lt.laplacian[i] - lb[i]));
        den = std::max(den, std::abs(lb[i]));
        dy = std::max(dy, std::abs(ed.div_y[i] - ed.div_y_direct[i]));
      }
      csv += std::to_string(i) + "," + fmt17(tt.tau[i]) + "," + fmt17(tt.theta[i]) + "," +
             fmt17(lt.laplacian[i]) + "," + fmt17(lb[i]) + "," + fmt17(ed.div_y[i]) + "," +
             fmt17(ed.div_y_direct[i]) + "\n";
    }
    const double rel = den > 0.0 ? num / den : num;
    out.result = {{"check", check},
                  {"flow_verdict", verdict},
                  {"vertices", imm.size()},
                  {"max_mean_curvature", lt.max_mean_curvature},
                  {"laplacian_max_abs_error", num},
                  {"laplacian_max_relative_error", rel},
                  {"div_y_max_abs_gap", dy}};
    char buf[160];
    std::snprintf(buf, sizeof buf, "laplacian relative error %.3e, |H| %.3e", rel, lt.max_mean_curvature);
    out.headline = buf;
    out.files.emplace_back("vertices.csv", csv);
    return out;
  }
  if (check == "constant_residual") {
    const std::vector<double> values = fc.numbers("values");
    fc.finish();
    const Grid grid = parse_grid(root.table("grid"));
    const auto& st = fam.structure();
    if (st.kind != MetricStructure::Kind::Warped)
      fail(ErrorCode::StructureMismatch, "constant_residual needs a warped model");
    const ScalarFunction& f = st.functions[0];
    const int n = fam.fiber_dim();
    json rows = json::array();
    std::string csv = "c,residual,expected,error\n";
    double worst = 0.0;
    for (double c : values) {
      GraphField field;
      field.grid = grid;
      field.family_id = fam.name();
      field.u.assign(grid.size(), c);
      const auto h = graph_mean_curvature(fam, field);
      double r = 0.0;
      for (int i = 0; i < grid.size(); ++i)
        if (!grid.is_boundary(i)) r = std::max(r, std::abs(h[i]));
      const double expected = n * std::abs(f.d1(c)) / f.value(c);
      const double err = std::abs(r - expected);
      worst = std::max(worst, err);
      rows.push_back({{"c", c}, {"residual", r}, {"expected", expected}, {"error", err}});
      csv += fmt17(c) + "," + fmt17(r) + "," + fmt17(expected) + "," + fmt17(err) + "\n";
    }
    out.result = {{"check", check}, {"rows", rows}, {"max_error", worst}};
    char buf[120];
    std::snprintf(buf, sizeof buf, "constant residual max error %.3e", worst);
    out.headline = buf;
    out.files.emplace_back("constant_residual.csv", csv);
    return out;
  }
  if (check == "specialization") {
    const Specialization which = parse_specialization(fc.str("specialization"), fc.key_path("specialization"));
    const FieldSpec fs_ = parse_field_spec(fc.table("field"));
    const long long levels = fc.integer("refinements", 3);
    fc.finish();
    Grid grid = parse_grid(root.table("grid"));
    json rows = json::array();
    std::string csv = "n,discrepancy\n";
    std::vector<double> gaps;
    for (long long l = 0; l <= levels; ++l) {
      const double gap = specialization_crosscheck(fam, grid, manufactured(fs_, grid), which);
      gaps.push_back(gap);
      rows.push_back({{"n", grid.axes[0].n}, {"discrepancy", gap}});
      csv += std::to_string(grid.axes[0].n) + "," + fmt17(gap) + "\n";
      for (auto& ax : grid.axes) ax.n = ax.periodic ? 2 * ax.n : 2 * ax.n - 1;
    }
    double order = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < gaps.size(); ++i) order = std::min(order, std::log2(gaps[i - 1] / gaps[i]));
    if (gaps.size() < 2) order = 0.0;
    out.result = {{"check", check}, {"specialization", specialization_name(which)},
                  {"rows", rows}, {"min_order", order}};
    char buf[120];
    std::snprintf(buf, sizeof buf, "%s discrepancy order %.3f", specialization_name(which), order);
    out.headline = buf;
    out.files.emplace_back("refinement.csv", csv);
    return out;
  }
  config_error("key '" + fc.key_path("check") + "' must be 'laplacian', 'constant_residual' or 'specialization'");
}

Outcome solver_outcome(const SolveResult& r) {
  Outcome out;
  out.result = json::parse(r.report.to_json());
  char buf[200];
  std::snprintf(buf, sizeof buf, "verdict %s, residual %.3e, u in [%.6g, %.6g]",
                solver_verdict_name(r.report.verdict), r.report.final_infnorm_residual,
                r.report.u_min, r.report.u_max);
  out.headline = buf;
  out.files.emplace_back("field.csv", field_csv(r.field));
  out.files.emplace_back("residual_history.csv", history_csv(r.report.residual_norm_history));
  return out;
}

Outcome run_graph_solve(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov,
                        const fs::path& base) {
  Section g = root.table("graph");
  GraphField u0;
  if (g.has("file")) {
    fs::path p = g.str("file");
    if (p.is_relative()) p = base / p;
    std::ifstream is(p);
    if (!is) fail(ErrorCode::IoError, "cannot read " + p.string());
    u0 = GraphField::read_csv(is);
    root.optional_table("grid");
  } else {
    const Grid grid = parse_grid(root.table("grid"));
    u0 = sample_field(manufactured(parse_field_spec(g.table("initial")), grid), grid, fam.name());
  }
  g.finish();
  const NewtonOptions o = parse_newton(root.optional_table("solver"), ov);
  return solver_outcome(newton_solve(fam, u0, o));
}

Outcome run_dirichlet(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov) {
  const Grid grid = parse_grid(root.table("grid"));
  Section d = root.table("dirichlet");
  const double t0 = d.num("boundary", 0.0);
  const SignConstraint sign = parse_sign(d.str("sign", "at_least"), d.key_path("sign"));
  DirichletOptions o;
  o.initial_bump = d.num("initial_bump", o.initial_bump);
  d.finish();
  o.newton = parse_newton(root.optional_table("solver"), ov);
  Outcome out = solver_outcome(dirichlet_solve(fam, grid, t0, sign, o));
  out.result["boundary"] = t0;
  out.result["fiber_dim"] = fam.fiber_dim();
  return out;
}

json trace_summary(const FlowTrace& tr) {
  const auto mp = tr.verdict == FlowVerdict::ConvergedMinimal ? max_principle_probe(tr)
                                                              : MaxPrincipleReport{};
  json j = {{"verdict", verdict_name(tr.verdict)},
            {"exit_reason", tr.exit_reason},
            {"steps", tr.steps},
            {"restarts", tr.restarts},
            {"initial_length", tr.initial_length},
            {"final_length", tr.lengths.empty() ? 0.0 : tr.lengths.back()},
            {"final_residual", tr.residual.empty() ? 0.0 : tr.residual.back()},
            {"tau_range", {tr.tau_min.empty() ? 0.0 : tr.tau_min.back(),
                           tr.tau_max.empty() ? 0.0 : tr.tau_max.back()}},
            {"theta_max", tr.theta_max.empty() ? 0.0 : tr.theta_max.back()}};
  if (tr.verdict == FlowVerdict::ConvergedMinimal)
    j["max_principle"] = {{"vertex", mp.vertex}, {"tau_max", mp.tau_max}, {"margin", mp.margin},
                          {"strict", mp.strict}};
  return j;
}

Outcome run_flow_experiment(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov,
                            std::uint64_t seed, const fs::path& base) {
  const DiscreteImmersion imm = parse_curve(root.table("curve"), fam, seed, base);
  FlowPolicy p = parse_policy(root.optional_table("flow"), seed);
  if (ov.tolerance) p.residual_tolerance = *ov.tolerance;
  const FlowTrace tr = run_flow(imm, fam, p);
  Outcome out;
  out.result = trace_summary(tr);
  std::ostringstream csv, txt;
  tr.write_csv(csv);
  tr.final_immersion.write(txt);
  out.files.emplace_back("trace.csv", csv.str());
  out.files.emplace_back("final_immersion.txt", txt.str());
  char buf[200];
  std::snprintf(buf, sizeof buf, "verdict %s after %d steps, tau in [%.6g, %.6g]",
                verdict_name(tr.verdict), tr.steps, tr.tau_min.back(), tr.tau_max.back());
  out.headline = buf;
  return out;
}

std::vector<double> parse_radii(Section& b) {
  if (b.has("radii")) return b.numbers("radii");
  const double from = b.num("radius_from"), to = b.num("radius_to"), step = b.num("radius_step");
  if (!(step > 0.0) || to < from) config_error("key '" + b.key_path("radius_step") + "' must give an increasing range");
  std::vector<double> r;
  for (int i = 0; from + i * step <= to + 1e-12 * std::abs(to); ++i) r.push_back(from + i * step);
  return r;
}

Outcome run_ball_threshold(Section& root, const MetricFamily& fam, const ScenarioOverrides& ov,
                           std::uint64_t seed) {
  Section b = root.table("ball");
  Ball center;
  center.center = to_vec(b.numbers("center"));
  center.pole = b.boolean("pole", false);
  if (center.center.size() != fam.dim()) config_error("key '" + b.key_path("center") + "' has the wrong length");
  const std::vector<double> radii = parse_radii(b);
  BallThresholdOptions o;
  o.seed = seed;
  o.seeds_per_radius = static_cast<int>(b.integer("seeds_per_radius", o.seeds_per_radius));
  o.vertices = static_cast<int>(b.integer("vertices", o.vertices));
  o.levels = static_cast<int>(b.integer("levels", o.levels));
  o.bisection_steps = static_cast<int>(b.integer("bisection_steps", o.bisection_steps));
  o.refine_steps = static_cast<int>(b.integer("refine_steps", o.refine_steps));
  b.finish();
  o.flow = parse_policy(root.optional_table("flow"), seed);
  if (ov.tolerance) o.flow.residual_tolerance = *ov.tolerance;
  const BallThresholdResult r = ball_threshold_experiment(fam, center, radii, o);
  Outcome out;
  std::string csv = "radius,seed_id,level,verdict,success,flows\n";
  for (const auto& oc : r.outcomes)
    csv += fmt17(oc.radius) + "," + std::to_string(oc.seed_id) + "," + fmt17(oc.level) + "," +
           oc.verdict + "," + (oc.success ? "1" : "0") + "," + std::to_string(oc.flows) + "\n";
  json examined = json::array();
  for (double x : r.radii) examined.push_back(x);
  out.result = {{"found", r.found},
                {"threshold", r.found ? json(r.threshold) : json(nullptr)},
                {"normalized", r.found && r.normalized > 0.0 ? json(r.normalized) : json(nullptr)},
                {"seed_count", r.seed_count},
                {"radii_examined", examined},
                {"flows", r.outcomes.size()}};
  out.files.emplace_back("outcomes.csv", csv);
  char buf[200];
  if (r.found)
    std::snprintf(buf, sizeof buf, "threshold %.6g (normalized %.6g) from %d seeds per radius",
                  r.threshold, r.normalized, r.seed_count);
  else
    std::snprintf(buf, sizeof buf, "no radius admitted a minimal curve (%d seeds per radius)", r.seed_count);
  out.headline = buf;
  return out;
}

Outcome run_normal_growth(Section& root, const MetricFamily& fam) {
  Section p = root.table("probe");
  const Vec center = to_vec(p.numbers("center"));
  const bool pole = p.boolean("pole", false);
  if (center.size() != fam.dim()) config_error("key '" + p.key_path("center") + "' has the wrong length");
  std::vector<double> radii;
  if (p.has("radii")) {
    radii = p.numbers("radii");
  } else {
    const double from = p.num("radius_from"), to = p.num("radius_to");
    const long long count = p.integer("radius_count", 12);
    if (count < 2 || !(to > from)) config_error("key '" + p.key_path("radius_count") + "' must give an increasing range");
    for (long long i = 0; i < count; ++i) radii.push_back(from + (to - from) * i / (count - 1));
  }
  const double delta = p.num("delta", 1e-3);
  const toml::node& rn = p.required("rays");
  const toml::array* arr = rn.as_array();
  if (!arr || arr->empty()) config_error("key '" + p.key_path("rays") + "' must be a non-empty array");
  std::vector<Vec> rays;
  for (const auto& e : *arr) rays.push_back(to_vec(Section::number_list(e, p.key_path("rays"))));
  p.finish();
  Outcome out;
  json rows = json::array();
  std::string csv = "ray,radius,h\n";
  bool all = true;
  for (std::size_t k = 0; k < rays.size(); ++k) {
    Vec c = center, dir;
    if (pole) {
      if (rays[k].size() != fam.fiber_dim()) config_error("key '" + p.key_path("rays") + "' entries must be fiber points");
      c.tail(fam.fiber_dim()) = rays[k];
      dir = Vec::Zero(fam.dim());
      dir[1] = 1.0;
    } else {
      if (rays[k].size() != fam.dim()) config_error("key '" + p.key_path("rays") + "' entries must be tangent vectors");
      dir = rays[k];
    }
    const GrowthProbe g = normal_growth_probe(fam, c, dir, radii, pole, delta);
    all = all && g.strictly_increasing;
    rows.push_back({{"ray", k}, {"strictly_increasing", g.strictly_increasing},
                    {"monotone_until", g.monotone_until}});
    for (std::size_t i = 0; i < g.radii.size(); ++i)
      csv += std::to_string(k) + "," + fmt17(g.radii[i]) + "," + fmt17(g.h[i]) + "\n";
  }
  out.result = {{"rays", rows}, {"all_strictly_increasing", all}};
  out.headline = all ? "h_r strictly increasing on every ray" : "h_r not increasing on some ray";
  out.files.emplace_back("growth.csv", csv);
  return out;
}

struct Parsed {
  toml::table doc;
  fs::path path;
  std::string id;
  std::string experiment;
};

Parsed parse_file(const std::string& config_path) {
  Parsed p;
  p.path = config_path;
  try {
    p.doc = toml::parse_file(config_path);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config " << config_path << ": " << e.description() << " at line " << e.source().begin.line;
    config_error(os.str());
  }
  const auto id = p.doc["id"].value<std::string>();
  if (!id || id->empty()) config_error("config " + config_path + ": missing key 'id'");
  for (char ch : *id)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.'))
      config_error("config " + config_path + ": key 'id' may only use letters, digits, '-', '_' and '.'");
  p.id = *id;
  return p;
}

ScenarioResult execute(Parsed& p, const ScenarioOverrides& ov) {
  const std::string ctx = "scenario " + p.id + ": ";
  try {
    Section root(&p.doc, "");
    root.str("id");
    const std::string exp = root.str("experiment");
    if (std::find_if(std::begin(kExperiments), std::end(kExperiments),
                     [&](const char* e) { return exp == e; }) == std::end(kExperiments))
      config_error("key 'experiment': unknown experiment '" + exp + "'");
    if (!ov.expect_experiment.empty() && exp != ov.expect_experiment)
      config_error("key 'experiment' is '" + exp + "' but this command runs '" + ov.expect_experiment + "'");
    p.experiment = exp;
    const long long file_seed = root.integer("seed", 0);
    if (file_seed < 0) config_error("key 'seed' must be non-negative");
    const std::uint64_t seed = ov.seed ? *ov.seed : static_cast<std::uint64_t>(file_seed);
    std::string out_base = root.str("out_dir", "out");
    if (!ov.out_dir.empty()) out_base = ov.out_dir;
    if (!root.has("metric")) config_error("missing key 'metric'");
    Section msec = root.table("metric");
    const std::string model = msec.has("model") ? msec.node("model")->value_or(std::string()) : "";
    const MetricFamily fam = parse_metric(msec);
    const fs::path base = p.path.parent_path();

    Outcome out;
    if (exp == "classify") out = run_classify(root, fam, ov);
    else if (exp == "formula_check") out = run_formula_check(root, fam, ov, seed, base);
    else if (exp == "graph_solve") out = run_graph_solve(root, fam, ov, base);
    else if (exp == "dirichlet") out = run_dirichlet(root, fam, ov);
    else if (exp == "flow") out = run_flow_experiment(root, fam, ov, seed, base);
    else if (exp == "ball_threshold") out = run_ball_threshold(root, fam, ov, seed);
    else out = run_normal_growth(root, fam);
    root.finish();

    ScenarioResult r;
    r.id = p.id;
    r.experiment = exp;
    const fs::path dir = fs::path(out_base) / p.id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    r.out_dir = dir.string();
    json artifacts = json::array();
    for (const auto& [name, text] : out.files) {
      write_text(dir / name, text);
      artifacts.push_back(name);
    }
    json report = {{"id", p.id},      {"experiment", exp},         {"seed", seed},
                   {"model", model},  {"metric", fam.name()},      {"status", "ok"},
                   {"headline", out.headline}, {"result", out.result}, {"artifacts", artifacts}};
    r.report = report.dump(2) + "\n";
    write_text(dir / "report.json", r.report);
    r.headline = out.headline;
    return r;
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind("scenario ", 0) == 0) throw;
    throw Error(e.code(), ctx + msg);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::DomainError, ctx + e.what());
  }
}

}  // namespace

MetricFamily metric_from_toml(const std::string& text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    config_error(std::string("metric: ") + std::string(e.description()));
  }
  return parse_metric(Section(&t, ""));
}

ScenarioResult run_scenario(const std::string& config_path, const ScenarioOverrides& ov) {
  Parsed p = parse_file(config_path);
  return execute(p, ov);
}

BatchResult run_batch(const std::string& dir, const ScenarioOverrides& ov) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) config_error("batch: '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".toml") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) config_error("batch: no .toml files in '" + dir + "'");

  std::vector<Parsed> parsed;
  std::map<std::string, std::string> seen;
  for (const auto& f : files) {
    parsed.push_back(parse_file(f.string()));
    auto [it, fresh] = seen.emplace(parsed.back().id, f.string());
    if (!fresh)
      config_error("batch: duplicate scenario id '" + parsed.back().id + "' in " + it->second +
                   " and " + f.string());
  }
  std::sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) { return a.id < b.id; });

  const std::size_t n = parsed.size();
  std::vector<std::optional<ScenarioResult>> results(n);
  std::vector<std::string> errors(n);
  std::vector<int> codes(n, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = execute(parsed[i], ov);
      } catch (const Error& e) {
        errors[i] = e.what();
        codes[i] = exit_code_for(static_cast<int>(e.code()));
      }
    }
  };
  const int workers = std::max(1, std::min<int>(ov.workers, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BatchResult br;
  json rows = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      br.results.push_back(*results[i]);
      rows.push_back({{"id", parsed[i].id}, {"experiment", results[i]->experiment},
                      {"status", "ok"}, {"headline", results[i]->headline}});
    } else {
      br.failures.push_back(errors[i]);
      if (br.exit_code == 0) br.exit_code = codes[i];
      rows.push_back({{"id", parsed[i].id}, {"status", "error"}, {"exit_code", codes[i]},
                      {"error", errors[i]}});
    }
  }
  std::string out_base = ov.out_dir.empty() ? "out" : ov.out_dir;
  fs::create_directories(out_base, ec);
  const fs::path summary = fs::path(out_base) / "summary.json";
  json doc = {{"scenarios", rows}, {"failed", br.failures.size()}};
  write_text(summary, doc.dump(2) + "\n");
  br.summary_path = summary.string();
  return br;
}

std::string merge_reports(const std::string& out_dir) {
  std::error_code ec;
  if (!fs::is_directory(out_dir, ec)) fail(ErrorCode::IoError, "report: '" + out_dir + "' is not a directory");
  std::vector<json> reports;
  for (const auto& e : fs::directory_iterator(out_dir)) {
    const fs::path rp = e.path() / "report.json";
    if (!e.is_directory() || !fs::exists(rp)) continue;
    std::ifstream is(rp);
    try {
      reports.push_back(json::parse(is));
    } catch (const json::exception& ex) {
      fail(ErrorCode::IoError, "report: cannot parse " + rp.string() + ": " + ex.what());
    }
  }
  std::sort(reports.begin(), reports.end(), [](const json& a, const json& b) {
    return a.value("id", std::string()) < b.value("id", std::string());
  });
  json rows = json::array();
  for (const auto& r : reports)
    rows.push_back({{"id", r.value("id", std::string())},
                    {"experiment", r.value("experiment", std::string())},
                    {"status", r.value("status", std::string())},
                    {"headline", r.value("headline", std::string())}});
  json doc = {{"scenarios", rows}, {"failed", 0}};
  const std::string text = doc.dump(2) + "\n";
  write_text(fs::path(out_dir) / "summary.json", text);
  return text;
}

}  // namespace minsub
