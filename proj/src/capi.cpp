#include "minsub/minsub.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "minsub/errors.hpp"
#include "minsub/flow.hpp"
#include "minsub/graph_pde.hpp"
#include "minsub/scenario.hpp"
#include "minsub/submanifold.hpp"
#include "minsub/verify.hpp"

struct minsub_metric {
  minsub::MetricFamily family;
};
struct minsub_immersion {
  minsub::DiscreteImmersion imm;
};
struct minsub_graph {
  minsub::GraphField field;
};

namespace {

thread_local std::string last_error;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

template <class F>
int guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return MINSUB_OK;
  } catch (const minsub::Error& e) {
    last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MINSUB_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MINSUB_INTERNAL_ERROR;
  }
}

void need(const void* p, const char* what) {
  if (!p) minsub::fail(minsub::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

minsub::ScenarioOverrides convert(const minsub_overrides* ov) {
  minsub::ScenarioOverrides o;
  if (!ov) return o;
  if (ov->out_dir) o.out_dir = ov->out_dir;
  if (ov->experiment) o.expect_experiment = ov->experiment;
  if (ov->has_seed) o.seed = ov->seed;
  if (ov->has_tolerance) o.tolerance = ov->tolerance;
  o.workers = ov->workers > 0 ? ov->workers : 1;
  return o;
}

}  // namespace

extern "C" {

const char* minsub_version(void) { return "0.1.0"; }

const char* minsub_last_error(void) { return last_error.c_str(); }

const char* minsub_status_name(int status) {
  if (status == MINSUB_OK) return "Ok";
  if (status == MINSUB_INTERNAL_ERROR) return "InternalError";
  if (status >= MINSUB_DOMAIN_ERROR && status <= MINSUB_INVALID_ARGUMENT)
    return minsub::error_code_name(static_cast<minsub::ErrorCode>(status));
  return "UnknownStatus";
}

int minsub_exit_code(int status) {
  if (status == MINSUB_OK) return 0;
  return minsub::exit_code_for(status);
}

void minsub_string_free(char* s) { std::free(s); }

int minsub_metric_from_toml(const char* text, minsub_metric** out) {
  return guarded([&] {
    need(text, "toml_text");
    need(out, "out");
    *out = new minsub_metric{minsub::metric_from_toml(text)};
  });
}

void minsub_metric_free(minsub_metric* m) { delete m; }

int minsub_metric_dim(const minsub_metric* m, int* dim) {
  return guarded([&] {
    need(m, "metric");
    need(dim, "dim");
    *dim = m->family.dim();
  });
}

int minsub_metric_eval(const minsub_metric* m, const double* p, double* beta, double* g) {
  return guarded([&] {
    need(m, "metric");
    need(p, "p");
    const int d = m->family.dim();
    minsub::Vec x(d - 1);
    for (int i = 1; i < d; ++i) x[i - 1] = p[i];
    const minsub::MetricValue v = m->family.eval(p[0], x);
    if (beta) *beta = v.beta;
    if (g)
      for (int i = 0; i < d - 1; ++i)
        for (int j = 0; j < d - 1; ++j) g[i * (d - 1) + j] = v.g(i, j);
  });
}

int minsub_metric_classify(const minsub_metric* m, const double* ranges, int samples,
                           double rel_tol, char** report_json) {
  return guarded([&] {
    need(m, "metric");
    need(ranges, "ranges");
    minsub::Region reg;
    for (int i = 0; i < m->family.dim(); ++i) reg.ranges.emplace_back(ranges[2 * i], ranges[2 * i + 1]);
    const auto rep = minsub::classify_monotonicity(m->family, reg, samples, rel_tol);
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    for (const auto& n : rep.flags.names()) flags.push_back(n);
    nlohmann::ordered_json j = {{"flags", flags},
                                {"tolerance", rep.tolerance},
                                {"lambda_range", {rep.lambda_min, rep.lambda_max}},
                                {"dbeta_range", {rep.dbeta_min, rep.dbeta_max}}};
    put(report_json, j.dump());
  });
}

int minsub_immersion_load(const char* path, minsub_immersion** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new minsub_immersion{minsub::DiscreteImmersion::load(path)};
  });
}

int minsub_immersion_curve(const double* coords, int vertices, int dim, int closed,
                           minsub_immersion** out) {
  return guarded([&] {
    need(coords, "coords");
    need(out, "out");
    if (vertices < 3 || dim < 2 || dim > minsub::kMaxDim)
      minsub::fail(minsub::ErrorCode::InvalidArgument, "bad curve sizes");
    std::vector<minsub::Vec> v;
    for (int i = 0; i < vertices; ++i) {
      minsub::Vec p(dim);
      for (int k = 0; k < dim; ++k) p[k] = coords[i * dim + k];
      v.push_back(p);
    }
    *out = new minsub_immersion{closed ? minsub::DiscreteImmersion::closed_curve(v)
                                       : minsub::DiscreteImmersion::open_curve(v)};
  });
}

int minsub_immersion_save(const minsub_immersion* imm, const char* path) {
  return guarded([&] {
    need(imm, "immersion");
    need(path, "path");
    imm->imm.save(path);
  });
}

void minsub_immersion_free(minsub_immersion* imm) { delete imm; }

int minsub_immersion_size(const minsub_immersion* imm, int* vertices, int* dim) {
  return guarded([&] {
    need(imm, "immersion");
    if (vertices) *vertices = imm->imm.size();
    if (dim) *dim = imm->imm.ambient_dim();
  });
}

int minsub_immersion_length(const minsub_immersion* imm, const minsub_metric* m, double* length) {
  return guarded([&] {
    need(imm, "immersion");
    need(m, "metric");
    need(length, "length");
    *length = minsub::volume(imm->imm, m->family);
  });
}

int minsub_flow(const minsub_immersion* seed, const minsub_metric* m, double tolerance,
                char** trace_json, minsub_immersion** final_immersion) {
  return guarded([&] {
    need(seed, "seed");
    need(m, "metric");
    minsub::FlowPolicy p;
    p.preconditioner = minsub::Preconditioner::Sobolev;
    if (tolerance > 0.0) p.residual_tolerance = tolerance;
    const minsub::FlowTrace tr = minsub::run_flow(seed->imm, m->family, p);
    nlohmann::ordered_json j = {{"verdict", minsub::verdict_name(tr.verdict)},
                                {"exit_reason", tr.exit_reason},
                                {"steps", tr.steps},
                                {"restarts", tr.restarts},
                                {"lengths", tr.lengths},
                                {"residual", tr.residual},
                                {"tau_min", tr.tau_min},
                                {"tau_max", tr.tau_max},
                                {"theta_max", tr.theta_max}};
    put(trace_json, j.dump());
    if (final_immersion) *final_immersion = new minsub_immersion{tr.final_immersion};
  });
}

int minsub_graph_load(const char* path, minsub_graph** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream is(path);
    if (!is) minsub::fail(minsub::ErrorCode::IoError, std::string("cannot read ") + path);
    *out = new minsub_graph{minsub::GraphField::read_csv(is)};
  });
}

int minsub_graph_save(const minsub_graph* g, const char* path) {
  return guarded([&] {
    need(g, "graph");
    need(path, "path");
    std::ofstream os(path);
    if (!os) minsub::fail(minsub::ErrorCode::IoError, std::string("cannot write ") + path);
    g->field.write_csv(os);
  });
}

void minsub_graph_free(minsub_graph* g) { delete g; }

int minsub_graph_size(const minsub_graph* g, int* nodes) {
  return guarded([&] {
    need(g, "graph");
    need(nodes, "nodes");
    *nodes = g->field.grid.size();
  });
}

int minsub_graph_residual(const minsub_graph* g, const minsub_metric* m, double* infnorm) {
  return guarded([&] {
    need(g, "graph");
    need(m, "metric");
    need(infnorm, "infnorm");
    double r = 0.0;
    for (double h : minsub::graph_mean_curvature(m->family, g->field)) r = std::max(r, std::abs(h));
    *infnorm = r;
  });
}

int minsub_run_scenario(const char* path, const minsub_overrides* ov, char** report_json) {
  return guarded([&] {
    need(path, "config_path");
    const auto r = minsub::run_scenario(path, convert(ov));
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(r.report);
    j["out_dir"] = r.out_dir;
    put(report_json, j.dump(2));
  });
}

int minsub_run_batch(const char* dir, const minsub_overrides* ov, char** summary_json) {
  std::string failures;
  int code = 0;
  const int st = guarded([&] {
    need(dir, "dir");
    const auto b = minsub::run_batch(dir, convert(ov));
    std::ifstream is(b.summary_path);
    std::stringstream ss;
    ss << is.rdbuf();
    put(summary_json, ss.str());
    for (const auto& f : b.failures) failures += f + "\n";
    code = b.exit_code;
  });
  if (st != MINSUB_OK) return st;
  if (!failures.empty()) {
    last_error = failures;
    return code == 2 ? MINSUB_CONFIG_ERROR : MINSUB_INTERNAL_ERROR;
  }
  return MINSUB_OK;
}

int minsub_verify(const char* suite, int workers, char** text, char** json, int* all_pass) {
  return guarded([&] {
    need(suite, "suite");
    minsub::VerifyOptions o;
    o.workers = workers > 0 ? workers : 1;
    const auto rep = minsub::verify_suite(suite, o);
    put(text, rep.to_text());
    put(json, rep.to_json());
    if (all_pass) *all_pass = rep.all_pass() ? 1 : 0;
  });
}

int minsub_report(const char* out_dir, char** summary_json) {
  return guarded([&] {
    need(out_dir, "out_dir");
    put(summary_json, minsub::merge_reports(out_dir));
  });
}

}  // extern "C"
