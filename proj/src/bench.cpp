#include "gibbsddrm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace gibbsddrm::bench {

using nlohmann::json;

namespace {

// Typed, strict access to one JSON object of the config. Every key must be
// consumed; leftovers are reported as unknown fields.
class Fields {
 public:
  Fields(const json& doc, std::string prefix)
      : doc_(doc), prefix_(std::move(prefix)) {
    if (!doc_.is_object()) throw ConfigError(prefix_, "must be an object");
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  double number(const std::string& key, double fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(path(key), "must be a number");
    return v->get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      throw ConfigError(path(key), "must be an integer");
    }
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) {
      throw ConfigError(path(key), "must be a nonnegative integer");
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(path(key), "must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(path(key), "must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = take(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(path(key), "must be an array");
    std::vector<double> out;
    for (size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]",
                          "must be a number");
      }
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  std::vector<long long> integers(const std::string& key) {
    const json* v = take(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(path(key), "must be an array");
    std::vector<long long> out;
    for (size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer()) {
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]",
                          "must be an integer");
      }
      out.push_back((*v)[i].get<long long>());
    }
    return out;
  }

  Fields object(const std::string& key) {
    static const json empty = json::object();
    const json* v = take(key);
    return Fields(v ? *v : empty, path(key));
  }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(path(item.key()), "unknown field");
      }
    }
  }

 private:
  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  const json& doc_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void one_of(const std::string& value, std::initializer_list<const char*> options,
            const std::string& field) {
  for (const char* o : options) {
    if (value == o) return;
  }
  std::string list;
  for (const char* o : options) list += (list.empty() ? "" : "|") + std::string(o);
  throw ConfigError(field, "must be one of " + list + ", got '" + value + "'");
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

bool is_mode(const std::string& mode) {
  return mode == "gibbsddrm" || mode == "ddrm" || mode == "blocked" ||
         mode == "pinv";
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  Fields root(doc, "");

  {
    Fields p = root.object("problem");
    c.problem.op = p.string("operator", c.problem.op);
    c.problem.height = p.integer("height", c.problem.op == "conv2d" ? 32 : 1);
    c.problem.width = p.integer("width", c.problem.width);
    c.problem.sigma_y = p.number("sigma_y", c.problem.sigma_y);
    c.problem.data_range = p.number("data_range", c.problem.data_range);
    Fields s = p.object("signal");
    c.problem.signal_source = s.string("source", c.problem.signal_source);
    c.problem.signal_path = s.string("path", "");
    s.finish();
    Fields k = p.object("kernel");
    c.problem.kernel.type = k.string("type", c.problem.kernel.type);
    c.problem.kernel.support_h = k.integer(
        "support_h", c.problem.op == "conv2d" ? 5 : 1);
    c.problem.kernel.support = k.integer("support", c.problem.kernel.support);
    c.problem.kernel.width = k.number("width", c.problem.kernel.width);
    c.problem.kernel.concentration =
        k.number("concentration", c.problem.kernel.concentration);
    c.problem.kernel.values = k.numbers("values");
    c.problem.kernel.path = k.string("path", "");
    k.finish();
    p.finish();
  }
  {
    Fields p = root.object("prior");
    c.prior.type = p.string("type", c.prior.type);
    c.prior.components = static_cast<int>(p.integer("components", c.prior.components));
    c.prior.segments = static_cast<int>(p.integer("segments", c.prior.segments));
    c.prior.min_length = static_cast<int>(p.integer("min_length", c.prior.min_length));
    c.prior.variance = p.number("variance", c.prior.variance);
    c.prior.mean = p.number("mean", c.prior.mean);
    c.prior.seed = p.unsigned_integer("seed", c.prior.seed);
    c.prior.path = p.string("path", "");
    p.finish();
  }
  {
    Fields p = root.object("schedule");
    c.schedule.type = p.string("type", c.schedule.type);
    c.schedule.steps = static_cast<int>(p.integer("steps", c.schedule.steps));
    c.schedule.sigma_min = p.number("sigma_min", c.schedule.sigma_min);
    c.schedule.sigma_max = p.number("sigma_max", c.schedule.sigma_max);
    p.finish();
  }
  {
    Fields p = root.object("sampler");
    SamplerSpec& s = c.sampler;
    s.cycles = static_cast<int>(p.integer("cycles", s.cycles));
    {
      Fields m = p.object("inner");
      for (long long v : m.integers("table")) {
        s.inner_table.push_back(static_cast<int>(v));
      }
      s.inner_switch = static_cast<int>(m.integer("switch_step", s.inner_switch));
      s.inner_count = static_cast<int>(m.integer("count", s.inner_count));
      m.finish();
    }
    s.eta = p.number("eta", s.eta);
    s.eta_b = p.number("eta_b", s.eta_b);
    {
      Fields l = p.object("langevin");
      s.step_size = l.number("step_size", s.step_size);
      s.langevin_steps = static_cast<int>(l.integer("steps", s.langevin_steps));
      s.noise_scale = l.number("noise_scale", s.noise_scale);
      s.phi_prior = l.string("prior", s.phi_prior);
      s.phi_prior_lambda = l.number("lambda", s.phi_prior_lambda);
      s.project_to_simplex = l.boolean("project_to_simplex", s.project_to_simplex);
      l.finish();
    }
    {
      Fields i = p.object("init");
      s.init.type = i.string("type", s.init.type);
      s.init.width = i.number("width", s.init.width);
      s.init.values = i.numbers("values");
      i.finish();
    }
    s.granularity = p.string("granularity", s.granularity);
    s.phi_updates_per_round = static_cast<int>(
        p.integer("phi_updates_per_round", s.phi_updates_per_round));
    s.blocked_rounds =
        static_cast<int>(p.integer("blocked_rounds", s.blocked_rounds));
    p.finish();
  }
  c.mode = root.string("mode", c.mode);
  c.output_dir = root.string("output_dir", c.output_dir);
  if (root.has("seeds")) {
    c.seeds.clear();
    for (long long v : root.integers("seeds")) {
      check(v >= 0, "seeds", "must be nonnegative");
      c.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  root.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  const json doc = io::read_json(path);
  return parse_config(doc, path.has_parent_path() ? path.parent_path() : ".");
}

void validate_config(const ExperimentConfig& c) {
  const ProblemSpec& p = c.problem;
  one_of(p.op, {"conv1d", "conv2d"}, "problem.operator");
  check(p.width >= 1, "problem.width", "must be >= 1");
  check(p.height >= 1, "problem.height", "must be >= 1");
  check(p.op == "conv2d" || p.height == 1, "problem.height",
        "must be 1 for conv1d");
  check(std::isfinite(p.sigma_y) && p.sigma_y >= 0.0, "problem.sigma_y",
        "must be finite and >= 0");
  check(p.data_range > 0.0, "problem.data_range", "must be > 0");
  one_of(p.signal_source, {"prior", "file"}, "problem.signal.source");
  if (p.signal_source == "file") {
    check(!p.signal_path.empty(), "problem.signal.path", "is required");
    check(fs::exists(resolve(c.base_dir, p.signal_path)), "problem.signal.path",
          "file not found: " + p.signal_path);
  }
  const KernelSpec& k = p.kernel;
  one_of(k.type, {"random_simplex", "gaussian", "box", "values", "file"},
         "problem.kernel.type");
  check(k.support >= 1 && k.support <= p.width, "problem.kernel.support",
        "must lie in [1, width]");
  check(k.support_h >= 1 && k.support_h <= p.height, "problem.kernel.support_h",
        "must lie in [1, height]");
  check(p.op == "conv2d" || k.support_h == 1, "problem.kernel.support_h",
        "must be 1 for conv1d");
  check(k.width > 0.0, "problem.kernel.width", "must be > 0");
  check(k.concentration > 0.0, "problem.kernel.concentration", "must be > 0");
  if (k.type == "values") {
    check(static_cast<Index>(k.values.size()) == k.support_h * k.support,
          "problem.kernel.values", "needs support_h * support entries");
  }
  if (k.type == "file") {
    check(!k.path.empty(), "problem.kernel.path", "is required");
    check(fs::exists(resolve(c.base_dir, k.path)), "problem.kernel.path",
          "file not found: " + k.path);
  }

  one_of(c.prior.type, {"gmm_templates", "gmm_file", "gaussian"}, "prior.type");
  check(c.prior.components >= 1, "prior.components", "must be >= 1");
  check(c.prior.segments >= 1, "prior.segments", "must be >= 1");
  check(c.prior.min_length >= 1, "prior.min_length", "must be >= 1");
  if (c.prior.type == "gmm_templates" && c.problem.op == "conv1d") {
    check(static_cast<Index>(c.prior.segments) * c.prior.min_length <= c.problem.width,
          "prior.segments", "segments * min_length exceeds the signal width");
  }
  check(c.prior.variance > 0.0, "prior.variance", "must be > 0");
  if (c.prior.type == "gmm_file") {
    check(!c.prior.path.empty(), "prior.path", "is required");
    check(fs::exists(resolve(c.base_dir, c.prior.path)), "prior.path",
          "file not found: " + c.prior.path);
  }

  one_of(c.schedule.type, {"geometric", "linear"}, "schedule.type");
  check(c.schedule.steps >= 1, "schedule.steps", "must be >= 1");
  check(c.schedule.sigma_max > 0.0, "schedule.sigma_max", "must be > 0");
  if (c.schedule.type == "geometric") {
    check(c.schedule.sigma_min > 0.0 && c.schedule.sigma_min < c.schedule.sigma_max,
          "schedule.sigma_min", "must lie in (0, sigma_max)");
  }

  const SamplerSpec& s = c.sampler;
  check(s.cycles >= 1, "sampler.cycles", "must be >= 1");
  if (!s.inner_table.empty()) {
    check(static_cast<int>(s.inner_table.size()) == c.schedule.steps,
          "sampler.inner.table", "needs one entry per step t < T");
    for (size_t i = 0; i < s.inner_table.size(); ++i) {
      check(s.inner_table[i] >= 0,
            "sampler.inner.table[" + std::to_string(i) + "]", "must be >= 0");
    }
  }
  check(s.inner_count >= 0, "sampler.inner.count", "must be >= 0");
  check(s.inner_switch >= 0, "sampler.inner.switch_step", "must be >= 0");
  check(s.eta >= 0.0 && s.eta <= 1.0, "sampler.eta", "must lie in [0, 1]");
  check(s.eta_b >= 0.0 && s.eta_b <= 1.0, "sampler.eta_b", "must lie in [0, 1]");
  check(std::isfinite(s.step_size) && s.step_size > 0.0,
        "sampler.langevin.step_size", "must be > 0");
  check(s.langevin_steps >= 1, "sampler.langevin.steps", "must be >= 1");
  check(s.noise_scale == 0.0 || s.noise_scale == 1.0,
        "sampler.langevin.noise_scale", "must be 0 or 1");
  one_of(s.phi_prior, {"flat", "laplace", "gaussian"}, "sampler.langevin.prior");
  if (s.phi_prior != "flat") {
    check(s.phi_prior_lambda > 0.0, "sampler.langevin.lambda", "must be > 0");
  }
  one_of(s.init.type, {"gaussian", "box", "values", "prior", "true"},
         "sampler.init.type");
  check(s.init.width > 0.0, "sampler.init.width", "must be > 0");
  if (s.init.type == "values") {
    check(static_cast<Index>(s.init.values.size()) == k.support_h * k.support,
          "sampler.init.values", "needs support_h * support entries");
  }
  if (s.init.type == "prior") {
    check(s.phi_prior != "flat", "sampler.init.type",
          "'prior' needs a laplace or gaussian sampler.langevin.prior");
  }
  one_of(s.granularity, {"per_step", "per_inner_step"}, "sampler.granularity");
  check(s.phi_updates_per_round >= 0, "sampler.phi_updates_per_round",
        "must be >= 0");
  check(s.blocked_rounds >= 0, "sampler.blocked_rounds", "must be >= 0");
  const bool samples_phi =
      (c.mode == "gibbsddrm" || c.mode == "blocked");
  if (samples_phi) {
    check(p.sigma_y > 0.0, "problem.sigma_y",
          "must be > 0 when the kernel is sampled");
  }
  check(is_mode(c.mode), "mode", "must be one of gibbsddrm|ddrm|blocked|pinv");
  check(!c.output_dir.empty(), "output_dir", "must not be empty");
  check(!c.seeds.empty(), "seeds", "must not be empty");
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  const ProblemSpec& p = c.problem;
  j["problem"] = {
      {"operator", p.op},
      {"height", p.height},
      {"width", p.width},
      {"sigma_y", p.sigma_y},
      {"data_range", p.data_range},
      {"signal", {{"source", p.signal_source}, {"path", p.signal_path}}},
      {"kernel",
       {{"type", p.kernel.type},
        {"support_h", p.kernel.support_h},
        {"support", p.kernel.support},
        {"width", p.kernel.width},
        {"concentration", p.kernel.concentration},
        {"values", p.kernel.values},
        {"path", p.kernel.path}}}};
  j["prior"] = {{"type", c.prior.type},
                {"components", c.prior.components},
                {"segments", c.prior.segments},
                {"min_length", c.prior.min_length},
                {"variance", c.prior.variance},
                {"mean", c.prior.mean},
                {"seed", c.prior.seed},
                {"path", c.prior.path}};
  j["schedule"] = {{"type", c.schedule.type},
                   {"steps", c.schedule.steps},
                   {"sigma_min", c.schedule.sigma_min},
                   {"sigma_max", c.schedule.sigma_max}};
  const SamplerSpec& s = c.sampler;
  j["sampler"] = {
      {"cycles", s.cycles},
      {"inner",
       {{"table", s.inner_table},
        {"switch_step", s.inner_switch},
        {"count", s.inner_count}}},
      {"eta", s.eta},
      {"eta_b", s.eta_b},
      {"langevin",
       {{"step_size", s.step_size},
        {"steps", s.langevin_steps},
        {"noise_scale", s.noise_scale},
        {"prior", s.phi_prior},
        {"lambda", s.phi_prior_lambda},
        {"project_to_simplex", s.project_to_simplex}}},
      {"init",
       {{"type", s.init.type}, {"width", s.init.width}, {"values", s.init.values}}},
      {"granularity", s.granularity},
      {"phi_updates_per_round", s.phi_updates_per_round},
      {"blocked_rounds", s.blocked_rounds}};
  j["mode"] = c.mode;
  j["output_dir"] = c.output_dir;
  j["seeds"] = c.seeds;
  return j;
}

NoiseSchedule build_schedule(const ScheduleSpec& spec) {
  if (spec.type == "linear") return make_linear_schedule(spec.steps, spec.sigma_max);
  return make_geometric_schedule(spec.steps, spec.sigma_min, spec.sigma_max);
}

namespace {

// Piecewise-constant 1-D templates: `segments` runs of at least min_length
// samples (circularly), levels alternating between [0.1, 0.4] and
// [0.6, 0.9] so every edge has contrast.
Matrix templates_1d(Index d, int count, int segments, int min_length, Rng& rng) {
  Matrix means(count, d);
  for (int k = 0; k < count; ++k) {
    // Stars and bars: spread the slack d - segments * min_length uniformly.
    const Index slack = d - static_cast<Index>(segments) * min_length;
    std::vector<Index> extra;
    for (int s = 0; s + 1 < segments; ++s) {
      extra.push_back(static_cast<Index>(rng.uniform() * static_cast<double>(slack + 1)));
    }
    extra.push_back(0);
    extra.push_back(slack);
    std::sort(extra.begin(), extra.end());
    const Index offset = static_cast<Index>(rng.uniform() * static_cast<double>(d));
    const bool high_first = rng.uniform() < 0.5;
    Index pos = 0;
    for (int s = 0; s < segments; ++s) {
      const Index len = min_length + extra[s + 1] - extra[s];
      const bool high = (s % 2 == 0) == high_first;
      const double level = (high ? 0.6 : 0.1) + 0.3 * rng.uniform();
      for (Index i = pos; i < pos + len; ++i) means(k, (i + offset) % d) = level;
      pos += len;
    }
  }
  return means;
}

// Background plus up to max_rects axis-aligned rectangles.
Matrix templates_2d(Index h, Index w, int count, int max_rects, Rng& rng) {
  Matrix means(count, h * w);
  for (int k = 0; k < count; ++k) {
    means.row(k).setConstant(0.1 + 0.8 * rng.uniform());
    const int rects = static_cast<int>(rng.uniform() * (max_rects + 1));
    for (int r = 0; r < rects; ++r) {
      const Index r0 = static_cast<Index>(rng.uniform() * h);
      const Index c0 = static_cast<Index>(rng.uniform() * w);
      const Index r1 = std::min<Index>(h, r0 + 1 + static_cast<Index>(rng.uniform() * h / 2));
      const Index c1 = std::min<Index>(w, c0 + 1 + static_cast<Index>(rng.uniform() * w / 2));
      const double level = 0.1 + 0.8 * rng.uniform();
      for (Index i = r0; i < r1; ++i) {
        for (Index j = c0; j < c1; ++j) means(k, i * w + j) = level;
      }
    }
  }
  return means;
}

}  // namespace

std::shared_ptr<const Denoiser> build_prior(const ExperimentConfig& c) {
  const Index d = c.problem.height * c.problem.width;
  if (c.prior.type == "gaussian") {
    return std::make_shared<GaussianPrior>(d, c.prior.mean, c.prior.variance);
  }
  if (c.prior.type == "gmm_file") {
    auto prior = std::make_shared<GmmPrior>(
        GmmPrior::from_json(io::read_json(resolve(c.base_dir, c.prior.path))));
    check(prior->dim() == d, "prior.path", "mixture dimension does not match");
    return prior;
  }
  Rng rng(c.prior.seed);
  Matrix means = c.problem.op == "conv2d"
                     ? templates_2d(c.problem.height, c.problem.width,
                                    c.prior.components, c.prior.segments, rng)
                     : templates_1d(d, c.prior.components, c.prior.segments,
                                    c.prior.min_length, rng);
  return std::make_shared<GmmPrior>(
      Vector::Constant(c.prior.components, 1.0 / c.prior.components),
      std::move(means), c.prior.variance);
}

json prior_to_json(const Denoiser& prior) {
  if (const auto* gmm = dynamic_cast<const GmmPrior*>(&prior)) {
    json j = gmm->to_json();
    j["type"] = "gmm";
    return j;
  }
  if (const auto* g = dynamic_cast<const GaussianPrior*>(&prior)) {
    return {{"type", "gaussian"},
            {"mean", std::vector<double>(g->mean().data(),
                                         g->mean().data() + g->mean().size())},
            {"variance", g->variance()}};
  }
  throw std::invalid_argument("prior_to_json: unsupported prior");
}

std::shared_ptr<const Denoiser> prior_from_json(const json& doc) {
  const std::string type = doc.value("type", "gmm");
  if (type == "gaussian") {
    const auto mean = doc.at("mean").get<std::vector<double>>();
    return std::make_shared<GaussianPrior>(
        Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size())),
        doc.at("variance").get<double>());
  }
  json gmm = doc;
  gmm.erase("type");
  return std::make_shared<GmmPrior>(GmmPrior::from_json(gmm));
}

Vector gaussian_kernel(Index support_h, Index support, double width) {
  Vector k(support_h * support);
  const double cr = 0.5 * static_cast<double>(support_h - 1);
  const double cc = 0.5 * static_cast<double>(support - 1);
  for (Index r = 0; r < support_h; ++r) {
    for (Index c = 0; c < support; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(c) - cc;
      k(r * support + c) = std::exp(-0.5 * (dr * dr + dc * dc) / (width * width));
    }
  }
  return k / k.sum();
}

Vector random_simplex_kernel(Index taps, double concentration, Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Vector k(taps);
  for (Index i = 0; i < taps; ++i) k(i) = gamma(rng.engine());
  return k / k.sum();
}

AlignmentGeometry alignment_geometry(const ProblemSpec& spec) {
  return {spec.height, spec.width, spec.kernel.support_h, spec.kernel.support};
}

std::unique_ptr<SpectralOperator> build_operator(const ProblemSpec& spec,
                                                 const Vector& kernel) {
  if (spec.op == "conv2d") {
    return std::make_unique<CirculantConvolution2d>(
        spec.height, spec.width, spec.kernel.support_h, spec.kernel.support,
        kernel);
  }
  return std::make_unique<CirculantConvolution1d>(spec.width, kernel);
}

namespace {

Vector init_kernel(const ExperimentConfig& c) {
  const KernelSpec& k = c.problem.kernel;
  const InitSpec& init = c.sampler.init;
  if (init.type == "box") {
    return Vector::Constant(k.support_h * k.support,
                            1.0 / static_cast<double>(k.support_h * k.support));
  }
  if (init.type == "values") {
    return Eigen::Map<const Vector>(init.values.data(),
                                    static_cast<Index>(init.values.size()));
  }
  return gaussian_kernel(k.support_h, k.support, init.width);
}

}  // namespace

PcgsConfig build_pcgs_config(const ExperimentConfig& c,
                             const Vector& true_kernel) {
  const SamplerSpec& s = c.sampler;
  PcgsConfig p;
  p.cycles = s.cycles;
  p.inner = s.inner_table.empty()
                ? InnerCounts::two_regime(c.schedule.steps, s.inner_switch,
                                          s.inner_count)
                : InnerCounts(s.inner_table);
  p.ddrm.eta = s.eta;
  p.ddrm.eta_b = s.eta_b;
  p.ddrm.sigma_y = c.problem.sigma_y;
  p.langevin.step_size = s.step_size;
  p.langevin.n_steps = s.langevin_steps;
  p.langevin.noise_scale = s.noise_scale;
  if (s.phi_prior == "laplace") {
    p.langevin.prior = PhiPrior::laplace(s.phi_prior_lambda);
  } else if (s.phi_prior == "gaussian") {
    p.langevin.prior = PhiPrior::gaussian(s.phi_prior_lambda);
  }
  p.langevin.project_to_simplex = s.project_to_simplex;
  p.granularity = s.granularity == "per_inner_step"
                      ? TraceGranularity::kPerInnerStep
                      : TraceGranularity::kPerStep;
  p.phi_updates_per_round = s.phi_updates_per_round;

  if (s.init.type == "prior") {
    p.phi_init = InitStrategy::from_prior();
  } else if (s.init.type == "true") {
    p.phi_init = InitStrategy::fixed(true_kernel);
  } else if (s.init.type == "values") {
    p.phi_init = InitStrategy::fixed(init_kernel(c));
  } else {
    const Vector k = init_kernel(c);
    p.phi_init = InitStrategy::heuristic(
        s.init.type + "_blur",
        [k](const SpectralOperator&, const Vector&, Rng&) { return k; });
  }
  return p;
}

Problem generate_problem(const ExperimentConfig& c, std::uint64_t seed) {
  validate_config(c);
  Problem p;
  p.spec = c.problem;
  p.seed = seed;
  p.prior = build_prior(c);
  const Index d = c.problem.height * c.problem.width;
  const bool image = c.problem.op == "conv2d";
  Rng rng(seed);

  if (c.problem.signal_source == "file") {
    const fs::path path = resolve(c.base_dir, c.problem.signal_path);
    if (path.extension() == ".pgm") {
      const io::Image img = io::read_pgm(path);
      check(img.height == c.problem.height && img.width == c.problem.width,
            "problem.signal.path", "image size does not match height x width");
      p.x_true = img.pixels;
    } else {
      p.x_true = io::read_csv(path);
      check(p.x_true.size() == d, "problem.signal.path",
            "signal length does not match height x width");
    }
  } else if (const auto* gmm = dynamic_cast<const GmmPrior*>(p.prior.get())) {
    p.x_true = gmm->sample(rng);
  } else {
    p.x_true = static_cast<const GaussianPrior&>(*p.prior).sample(rng);
  }
  // 2-D signals are stored as 8-bit PGM; keep the stored truth exact.
  if (image) p.x_true = p.x_true.unaryExpr(&io::quantize_pixel);

  const KernelSpec& k = c.problem.kernel;
  const Index taps = k.support_h * k.support;
  if (k.type == "random_simplex") {
    p.kernel_true = random_simplex_kernel(taps, k.concentration, rng);
  } else if (k.type == "gaussian") {
    p.kernel_true = gaussian_kernel(k.support_h, k.support, k.width);
  } else if (k.type == "box") {
    p.kernel_true = Vector::Constant(taps, 1.0 / static_cast<double>(taps));
  } else if (k.type == "values") {
    p.kernel_true = Eigen::Map<const Vector>(k.values.data(), taps);
  } else {
    p.kernel_true = io::read_csv(resolve(c.base_dir, k.path));
    check(p.kernel_true.size() == taps, "problem.kernel.path",
          "kernel length does not match support_h * support");
  }
  p.op = build_operator(c.problem, p.kernel_true);
  p.y = p.op->apply(p.x_true);
  if (c.problem.sigma_y > 0.0) p.y += c.problem.sigma_y * rng.normal_vector(d);
  return p;
}

fs::path seed_dir(const ExperimentConfig& c, std::uint64_t seed) {
  return fs::path(c.output_dir) / ("seed_" + std::to_string(seed));
}

void write_problem(const Problem& p, const ExperimentConfig& c,
                   const fs::path& dir) {
  const bool image = p.spec.op == "conv2d";
  const std::string signal_file = image ? "x_true.pgm" : "x_true.csv";
  if (image) {
    io::write_pgm(dir / signal_file, {p.spec.height, p.spec.width, p.x_true});
  } else {
    io::write_csv(dir / signal_file, p.x_true);
  }
  io::write_csv(dir / "kernel_true.csv", p.kernel_true);
  io::write_csv(dir / "y.csv", p.y);
  io::write_json(dir / "prior.json", prior_to_json(*p.prior));
  json manifest;
  manifest["format"] = "gibbsddrm-problem";
  manifest["version"] = 1;
  manifest["seed"] = p.seed;
  manifest["operator"] = {{"type", p.spec.op},
                          {"height", p.spec.height},
                          {"width", p.spec.width},
                          {"kernel_h", p.spec.kernel.support_h},
                          {"kernel_w", p.spec.kernel.support}};
  manifest["sigma_y"] = p.spec.sigma_y;
  manifest["data_range"] = p.spec.data_range;
  manifest["files"] = {{"signal", signal_file},
                       {"kernel", "kernel_true.csv"},
                       {"measurement", "y.csv"},
                       {"prior", "prior.json"}};
  manifest["config"] = config_to_json(c);
  io::write_json(dir / "manifest.json", manifest);
}

Problem load_problem(const fs::path& dir) {
  const json m = io::read_json(dir / "manifest.json");
  if (m.value("format", "") != "gibbsddrm-problem") {
    throw io::IoError(dir / "manifest.json", "not a problem manifest");
  }
  Problem p;
  try {
    p.seed = m.at("seed").get<std::uint64_t>();
    const json& op = m.at("operator");
    p.spec.op = op.at("type").get<std::string>();
    p.spec.height = op.at("height").get<Index>();
    p.spec.width = op.at("width").get<Index>();
    p.spec.kernel.support_h = op.at("kernel_h").get<Index>();
    p.spec.kernel.support = op.at("kernel_w").get<Index>();
    p.spec.sigma_y = m.at("sigma_y").get<double>();
    p.spec.data_range = m.at("data_range").get<double>();
  } catch (const json::exception& e) {
    throw io::IoError(dir / "manifest.json", e.what());
  }
  const json& files = m.at("files");
  const fs::path signal = dir / files.at("signal").get<std::string>();
  if (signal.extension() == ".pgm") {
    p.x_true = io::read_pgm(signal).pixels;
  } else {
    p.x_true = io::read_csv(signal);
  }
  p.kernel_true = io::read_csv(dir / files.at("kernel").get<std::string>());
  p.y = io::read_csv(dir / files.at("measurement").get<std::string>());
  p.prior = prior_from_json(io::read_json(dir / files.at("prior").get<std::string>()));
  p.op = build_operator(p.spec, p.kernel_true);
  const Index d = p.spec.height * p.spec.width;
  if (p.x_true.size() != d || p.y.size() != d) {
    throw io::IoError(dir, "array sizes do not match the manifest");
  }
  if (p.spec.sigma_y == 0.0 && p.op->apply(p.x_true) != p.y) {
    throw io::IoError(dir / "y.csv",
                      "noise-free measurement differs from H x_true");
  }
  return p;
}

std::uint64_t sampler_seed(std::uint64_t seed) { return mix_seed(seed); }

Vector pseudo_inverse(const SpectralOperator& op, const Vector& y) {
  return op.from_spectral_data(op.to_spectral_measurement(y));
}

long evaluations_to_threshold(const std::vector<KernelErrorPoint>& trace,
                              double threshold) {
  for (const KernelErrorPoint& p : trace) {
    if (p.kernel_error <= threshold) return p.denoiser_evaluations;
  }
  return -1;
}

int blocked_rounds(const ExperimentConfig& c, const PcgsConfig& pcgs) {
  if (c.sampler.blocked_rounds > 0) return c.sampler.blocked_rounds;
  const int budget = pcgs.cycles * pcgs.inner.total();
  const int per = std::max(1, pcgs.phi_updates_per_round);
  return std::max(1, (budget + per - 1) / per);
}

RunOutput run_restoration(const Problem& problem, const ExperimentConfig& c,
                          const std::string& mode) {
  if (!is_mode(mode)) throw ConfigError("mode", "unknown mode '" + mode + "'");
  const auto start = std::chrono::steady_clock::now();
  RunOutput out;
  out.mode = mode;
  out.seed = problem.seed;
  const NoiseSchedule schedule = build_schedule(c.schedule);
  PcgsConfig pcgs = build_pcgs_config(c, problem.kernel_true);
  pcgs.ddrm.sigma_y = problem.spec.sigma_y;
  const AlignmentGeometry geometry = alignment_geometry(problem.spec);
  Rng rng(sampler_seed(problem.seed));

  std::unique_ptr<SpectralOperator> op = problem.op->clone();
  if (mode == "ddrm") {
    out.phi_init = problem.kernel_true;
  } else {
    // Own stream, so every mode hands the same generator to the sampler.
    Rng init_rng = rng.fork(0x696e6974);
    out.phi_init = pcgs.phi_init.initial_phi(*op, problem.y, pcgs.langevin, init_rng);
    pcgs.phi_init = InitStrategy::fixed(out.phi_init);
  }
  op->set_params(out.phi_init);
  out.init_kernel_error =
      align_kernel(problem.kernel_true, out.phi_init, geometry).error;
  out.kernel_trace.push_back({0, out.init_kernel_error});
  pcgs.on_phi_update = [&](const PhiUpdateInfo& info) {
    out.kernel_trace.push_back(
        {info.denoiser_evaluations,
         align_kernel(problem.kernel_true, info.phi, geometry).error});
  };

  try {
    if (mode == "gibbsddrm") {
      out.result = run_gibbsddrm(*op, problem.y, schedule, *problem.prior, pcgs, rng);
    } else if (mode == "blocked") {
      PcgsConfig blocked = pcgs;
      blocked.cycles = blocked_rounds(c, pcgs);
      out.result = run_blocked_gibbs(*op, problem.y, schedule, *problem.prior,
                                     blocked, rng);
    } else if (mode == "ddrm") {
      out.result =
          run_ddrm(*op, problem.y, schedule, pcgs.ddrm, *problem.prior, rng);
    } else {
      out.result.x0 = pseudo_inverse(*op, problem.y);
      out.result.phi = op->params();
    }
  } catch (const NonFiniteError& e) {
    out.ok = false;
    out.result = RestorationResult{};
    out.result.failure = e.what();
    out.failure_step = {e.cycle(), e.t(), e.m()};
  }
  if (out.ok) {
    out.metrics = compute_metrics(problem.x_true, out.result.x0,
                                  problem.kernel_true, out.result.phi,
                                  problem.spec.data_range, geometry);
  }
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

namespace {

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

json result_to_json(const RunOutput& run, const ExperimentConfig& c) {
  json j;
  j["format"] = "gibbsddrm-result";
  j["version"] = 1;
  j["mode"] = run.mode;
  j["seed"] = run.seed;
  j["status"] = run.ok ? "ok" : "failed";
  j["failure"] = run.result.failure
                     ? json{{"message", *run.result.failure},
                            {"cycle", run.failure_step[0]},
                            {"t", run.failure_step[1]},
                            {"m", run.failure_step[2]}}
                     : json();
  j["metrics"] = run.ok ? metrics_to_json(run.metrics) : json();
  j["init_kernel_error"] = run.init_kernel_error;
  j["phi_init"] = to_std(run.phi_init);
  j["x0_estimate"] = to_std(run.result.x0);
  j["phi_estimate"] = to_std(run.result.phi);
  j["counts"] = {{"denoiser_evaluations", run.result.denoiser_evaluations},
                 {"latent_samples", run.result.latent_samples},
                 {"phi_updates", run.result.phi_updates}};
  j["arrays"] = {{"x0", "x0_" + run.mode + ".csv"},
                 {"phi", "phi_" + run.mode + ".csv"},
                 {"diagnostics", "diagnostics_" + run.mode + ".csv"},
                 {"plot", "plot_" + run.mode + ".svg"},
                 {"problem", "manifest.json"}};
  json events = json::array();
  for (const TraceEvent& e : run.result.events) {
    events.push_back({to_string(e.kind), e.cycle, e.t, e.m, e.k});
  }
  json steps = json::array();
  for (const StepDiagnostics& s : run.result.steps) {
    steps.push_back({{"cycle", s.cycle},
                     {"t", s.t},
                     {"m", s.m},
                     {"residual", s.residual},
                     {"denoiser_evaluations", s.denoiser_evaluations},
                     {"phi", to_std(s.phi)}});
  }
  json kernel_trace = json::array();
  for (const KernelErrorPoint& p : run.kernel_trace) {
    kernel_trace.push_back({p.denoiser_evaluations, p.kernel_error});
  }
  j["trace"] = {{"events", events},
                {"steps", steps},
                {"kernel_error", kernel_trace}};
  j["config"] = config_to_json(c);
  return j;
}

std::string diagnostics_csv(const RunOutput& run, const Problem& problem) {
  const AlignmentGeometry g = alignment_geometry(problem.spec);
  std::ostringstream out;
  out << "cycle,t,m,residual,denoiser_evaluations,kernel_error";
  const Index p = problem.kernel_true.size();
  for (Index i = 0; i < p; ++i) out << ",phi_" << i;
  out << '\n';
  for (const StepDiagnostics& s : run.result.steps) {
    out << s.cycle << ',' << s.t << ',' << s.m << ','
        << io::format_double(s.residual) << ',' << s.denoiser_evaluations << ','
        << io::format_double(align_kernel(problem.kernel_true, s.phi, g).error);
    for (Index i = 0; i < s.phi.size(); ++i) {
      out << ',' << io::format_double(s.phi(i));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::string polyline(const std::vector<double>& ys, double x0, double y0,
                     double w, double h, const std::string& colour) {
  if (ys.empty()) return "";
  double lo = *std::min_element(ys.begin(), ys.end());
  double hi = *std::max_element(ys.begin(), ys.end());
  if (!(hi > lo)) hi = lo + 1.0;
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << "<polyline fill=\"none\" stroke=\""
      << colour << "\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < ys.size(); ++i) {
    const double x = x0 + (ys.size() == 1 ? 0.0 : w * i / (ys.size() - 1.0));
    const double y = y0 + h - h * (ys[i] - lo) / (hi - lo);
    out << x << ',' << y << ' ';
  }
  out << "\"/>\n";
  out << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << std::setprecision(3)
      << std::defaultfloat << hi << "</text>\n";
  out << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + h
      << "\" text-anchor=\"end\" font-size=\"10\">" << lo << "</text>\n";
  return out.str();
}

}  // namespace

std::string diagnostics_svg(const RunOutput& run, const Problem& problem) {
  const AlignmentGeometry g = alignment_geometry(problem.spec);
  std::vector<double> residual;
  std::vector<double> kernel;
  for (const StepDiagnostics& s : run.result.steps) {
    residual.push_back(std::log10(std::max(s.residual, 1e-300)));
    kernel.push_back(align_kernel(problem.kernel_true, s.phi, g).error);
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
         "height=\"420\" viewBox=\"0 0 720 420\">\n"
      << "<rect width=\"720\" height=\"420\" fill=\"white\"/>\n"
      << "<text x=\"360\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
      << run.mode << ", seed " << run.seed << "</text>\n";
  const double x0 = 70, w = 620, h = 150;
  for (int panel = 0; panel < 2; ++panel) {
    const double y0 = 35 + panel * 190;
    out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w
        << "\" height=\"" << h << "\" fill=\"none\" stroke=\"#999\"/>\n"
        << "<text x=\"" << x0 + 6 << "\" y=\"" << y0 + 14
        << "\" font-size=\"11\">"
        << (panel == 0 ? "log10 residual ||y - H xhat||"
                       : "kernel error (aligned, relative)")
        << "</text>\n"
        << polyline(panel == 0 ? residual : kernel, x0, y0, w, h,
                    panel == 0 ? "#1f5fa8" : "#b03a2e");
  }
  out << "<text x=\"380\" y=\"412\" text-anchor=\"middle\" font-size=\"11\">"
         "recorded step (reverse diffusion order)</text>\n</svg>\n";
  return out.str();
}

void write_run(const RunOutput& run, const ExperimentConfig& c,
               const Problem& problem, const fs::path& dir) {
  io::write_json(dir / ("result_" + run.mode + ".json"), result_to_json(run, c));
  io::write_csv(dir / ("x0_" + run.mode + ".csv"), run.result.x0);
  io::write_csv(dir / ("phi_" + run.mode + ".csv"), run.result.phi);
  io::write_text(dir / ("diagnostics_" + run.mode + ".csv"),
                 diagnostics_csv(run, problem));
  io::write_text(dir / ("plot_" + run.mode + ".svg"),
                 diagnostics_svg(run, problem));
  io::write_json(dir / ("timing_" + run.mode + ".json"),
                 {{"mode", run.mode}, {"seed", run.seed},
                  {"seconds", run.seconds}});
}

}  // namespace gibbsddrm::bench
