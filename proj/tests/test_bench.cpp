#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gibbsddrm/bench.hpp"
#include "gibbsddrm/io.hpp"
#include "gibbsddrm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace gibbsddrm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gibbsddrm_test_bench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_doc() {
  return json::parse(R"({
    "problem": {"operator": "conv1d", "width": 16, "sigma_y": 0.02,
                "kernel": {"type": "random_simplex", "support": 3}},
    "prior": {"type": "gmm_templates", "components": 3, "segments": 2,
              "min_length": 2, "variance": 0.001, "seed": 4},
    "schedule": {"type": "geometric", "steps": 20, "sigma_min": 0.01, "sigma_max": 1.5},
    "sampler": {"inner": {"switch_step": 10, "count": 1},
                "langevin": {"step_size": 1e-5, "steps": 5}},
    "mode": "gibbsddrm",
    "seeds": [3]
  })");
}

std::string error_field(const json& doc) {
  try {
    bench::parse_config(doc);
  } catch (const bench::ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("metric examples") {
  const Vector x = vec({0.1, 0.5, 0.9});
  const Metrics same = compute_metrics(x, x, vec({1, 0}), vec({1, 0}), 1.0);
  CHECK(same.mse == 0.0);
  CHECK_FALSE(same.psnr_db.has_value());
  const json j = metrics_to_json(same);
  CHECK(j["psnr_db"].is_null());
  CHECK(j["psnr_infinite"] == true);

  // MSE 0.01 at range 1 is 20 dB.
  CHECK(psnr(vec({0.0, 0.0}), vec({0.1, -0.1}), 1.0) == doctest::Approx(20.0));
  CHECK(psnr(vec({0.0}), vec({0.2}), 2.0) == doctest::Approx(10 * std::log10(4.0 / 0.04)));
  CHECK(std::isinf(psnr(x, x, 1.0)));
}

TEST_CASE("kernel error is taken after circular alignment") {
  const Vector k = vec({0.5, 0.3, 0.2, 0.0});
  const Vector shifted = vec({0.0, 0.5, 0.3, 0.2});
  const KernelAlignment a = align_kernel(k, shifted, {});
  CHECK(a.error == doctest::Approx(0.0));
  CHECK(a.shift_cols != 0);

  // Zero-padded to a 1 x 8 grid, a shift can move taps past the support.
  const AlignmentGeometry g{1, 8, 1, 3};
  CHECK(align_kernel(vec({0.6, 0.3, 0.1}), vec({0.0, 0.6, 0.3}), g).error > 0.0);

  const Vector ref = vec({1.0, 0.0});
  CHECK(align_kernel(ref, vec({0.0, 0.0}), {}).error == doctest::Approx(1.0));
  CHECK(roll(vec({1, 2, 3, 4}), 1, 4, 0, 1) == vec({4, 1, 2, 3}));
}

TEST_CASE("signal metrics are reported raw and counter-shifted") {
  const Vector x = vec({0.0, 0.2, 0.8, 0.4, 0.1, 0.0});
  const Vector k = vec({0.7, 0.3, 0.0, 0.0, 0.0, 0.0});
  // Shifting the kernel forward and the signal back leaves H x unchanged.
  const Metrics m = compute_metrics(x, roll(x, 1, 6, 0, -1), k, roll(k, 1, 6, 0, 1), 1.0,
                                    {1, 6, 1, 6});
  CHECK(m.kernel_error == doctest::Approx(0.0));
  CHECK(m.mse > 0.0);
  CHECK(m.mse_aligned == 0.0);
}

TEST_CASE("CSV round trips are bit exact") {
  const fs::path dir = scratch("csv");
  const Vector v = vec({1.0 / 3.0, -2.5e-300, 0.0, 123456789.123456789, -0.1,
                        std::numeric_limits<double>::max(), 4.9e-324});
  io::write_csv(dir / "v.csv", v);
  const Vector back = io::read_csv(dir / "v.csv");
  REQUIRE(back.size() == v.size());
  for (Index i = 0; i < v.size(); ++i) CHECK(back(i) == v(i));

  CVector c(2);
  c << Complex(0.1, -0.7), Complex(1e-9, 3.0);
  io::write_csv_complex(dir / "c.csv", c);
  CHECK(io::read_csv_complex(dir / "c.csv") == c);

  CHECK(io::parse_double(io::format_double(0.1)) == 0.1);
  io::write_text(dir / "bad.csv", "0.5\nnot-a-number\n");
  CHECK_THROWS_WITH_AS(io::read_csv(dir / "bad.csv"), doctest::Contains("bad.csv"), io::IoError);
  CHECK_THROWS_AS(io::read_csv(dir / "missing.csv"), io::IoError);
}

TEST_CASE("PGM round trip keeps quantized pixels") {
  const fs::path dir = scratch("pgm");
  io::Image img{2, 3, vec({0.0, 1.0, 0.5, 0.25, -0.3, 1.7})};
  io::write_pgm(dir / "a.pgm", img);
  const io::Image back = io::read_pgm(dir / "a.pgm");
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  for (Index i = 0; i < 6; ++i) CHECK(back.pixels(i) == io::quantize_pixel(img.pixels(i)));
  CHECK(back.pixels(4) == 0.0);
  CHECK(back.pixels(5) == 1.0);
  // A second trip is exact.
  io::write_pgm(dir / "b.pgm", back);
  CHECK(io::read_pgm(dir / "b.pgm").pixels == back.pixels);
  CHECK(slurp(dir / "a.pgm").rfind("P5\n3 2\n255\n", 0) == 0);

  io::write_text(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(io::read_pgm(dir / "bad.pgm"), io::IoError);
}

TEST_CASE("config parsing and errors name the field") {
  const bench::ExperimentConfig c = bench::parse_config(small_doc());
  CHECK(c.problem.width == 16);
  CHECK(c.sampler.inner_switch == 10);
  CHECK(c.seeds == std::vector<std::uint64_t>{3});

  // Normalized form reproduces itself.
  const json norm = bench::config_to_json(c);
  CHECK(bench::config_to_json(bench::parse_config(norm)) == norm);

  auto with = [](const std::string& pointer, const json& value) {
    json d = small_doc();
    d[json::json_pointer(pointer)] = value;
    return d;
  };
  CHECK(error_field(with("/problem/sigma_y", -1.0)) == "problem.sigma_y");
  CHECK(error_field(with("/problem/operator", "conv3d")) == "problem.operator");
  CHECK(error_field(with("/problem/kernel/support", 40)) == "problem.kernel.support");
  CHECK(error_field(with("/sampler/eta", 2.0)) == "sampler.eta");
  CHECK(error_field(with("/sampler/langevin/step_size", 0.0)) == "sampler.langevin.step_size");
  CHECK(error_field(with("/schedule/steps", 0)) == "schedule.steps");
  CHECK(error_field(with("/mode", "magic")) == "mode");
  CHECK(error_field(with("/seeds", json::array())) == "seeds");
  CHECK(error_field(with("/prior/segments", 9)) == "prior.segments");
  CHECK(error_field(with("/sampler/colour", 1)) == "sampler.colour");
  CHECK(error_field(with("/problem/width", "wide")) == "problem.width");
}

TEST_CASE("noise-free problems are re-verified on load") {
  json doc = small_doc();
  doc["problem"]["sigma_y"] = 0.0;
  doc["mode"] = "ddrm";
  const bench::ExperimentConfig c = bench::parse_config(doc);
  const bench::Problem p = bench::generate_problem(c, 3);
  CHECK(p.y == p.op->apply(p.x_true));

  const fs::path dir = scratch("noiseless");
  bench::write_problem(p, c, dir);
  const bench::Problem back = bench::load_problem(dir);
  CHECK(back.y == p.y);

  Vector tampered = p.y;
  tampered(0) += 1e-12;
  io::write_csv(dir / "y.csv", tampered);
  CHECK_THROWS_WITH_AS(bench::load_problem(dir), doctest::Contains("y.csv"), io::IoError);
}

TEST_CASE("generation is byte-reproducible and loads bit exactly") {
  const bench::ExperimentConfig c = bench::parse_config(small_doc());
  const fs::path a = scratch("gen_a");
  const fs::path b = scratch("gen_b");
  const bench::Problem p = bench::generate_problem(c, 3);
  bench::write_problem(p, c, a);
  bench::write_problem(bench::generate_problem(c, 3), c, b);
  for (const auto& entry : fs::directory_iterator(a)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  }
  const bench::Problem back = bench::load_problem(a);
  CHECK(back.x_true == p.x_true);
  CHECK(back.kernel_true == p.kernel_true);
  CHECK(back.y == p.y);
  CHECK(back.seed == 3);
  CHECK(bench::generate_problem(c, 4).y != p.y);
}

TEST_CASE("2-D problems at the image noise level") {
  json doc = small_doc();
  doc["problem"] = json::parse(R"({"operator": "conv2d", "height": 6, "width": 8,
      "sigma_y": 0.02, "kernel": {"type": "gaussian", "support_h": 3, "support": 3}})");
  doc["prior"] = json::parse(R"({"type": "gmm_templates", "components": 2, "segments": 2,
      "variance": 0.001})");
  const bench::ExperimentConfig c = bench::parse_config(doc);
  const bench::Problem p = bench::generate_problem(c, 1);
  CHECK(p.x_true.minCoeff() >= 0.0);
  CHECK(p.x_true.maxCoeff() <= 1.0);
  const double noise_sd = std::sqrt((p.y - p.op->apply(p.x_true)).squaredNorm() / 48.0);
  CHECK(noise_sd == doctest::Approx(0.02).epsilon(0.5));

  const fs::path dir = scratch("image");
  bench::write_problem(p, c, dir);
  CHECK(fs::exists(dir / "x_true.pgm"));
  const bench::Problem back = bench::load_problem(dir);
  CHECK(back.x_true == p.x_true);
  CHECK(back.y == p.y);
}

TEST_CASE("restoration results are deterministic and recomputable") {
  const bench::ExperimentConfig c = bench::parse_config(small_doc());
  const bench::Problem p = bench::generate_problem(c, 3);
  for (const std::string mode : {"gibbsddrm", "ddrm", "blocked", "pinv"}) {
    CAPTURE(mode);
    const bench::RunOutput a = bench::run_restoration(p, c, mode);
    const bench::RunOutput b = bench::run_restoration(p, c, mode);
    REQUIRE(a.ok);
    CHECK(bench::result_to_json(a, c).dump() == bench::result_to_json(b, c).dump());
    const Metrics m = compute_metrics(p.x_true, a.result.x0, p.kernel_true, a.result.phi,
                                      1.0, bench::alignment_geometry(p.spec));
    CHECK(metrics_to_json(m) == metrics_to_json(a.metrics));
  }
  const bench::RunOutput truth = bench::run_restoration(p, c, "ddrm");
  CHECK(truth.phi_init == p.kernel_true);
  CHECK(truth.init_kernel_error == 0.0);
}

TEST_CASE("write_run emits every promised file") {
  const bench::ExperimentConfig c = bench::parse_config(small_doc());
  const bench::Problem p = bench::generate_problem(c, 3);
  const fs::path dir = scratch("run");
  bench::write_problem(p, c, dir);
  const bench::RunOutput run = bench::run_restoration(p, c, "gibbsddrm");
  bench::write_run(run, c, p, dir);
  for (const char* f : {"result_gibbsddrm.json", "x0_gibbsddrm.csv", "phi_gibbsddrm.csv",
                        "diagnostics_gibbsddrm.csv", "plot_gibbsddrm.svg",
                        "timing_gibbsddrm.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(io::read_csv(dir / "x0_gibbsddrm.csv") == run.result.x0);
  CHECK(slurp(dir / "plot_gibbsddrm.svg").rfind("<svg", 0) == 0);
  const json result = io::read_json(dir / "result_gibbsddrm.json");
  CHECK(result["status"] == "ok");
  CHECK(result["seed"] == 3);
}

TEST_CASE("a diverging run is recorded with its failing step") {
  json doc = small_doc();
  doc["sampler"]["langevin"]["step_size"] = 1e300;
  doc["sampler"]["langevin"]["project_to_simplex"] = false;
  const bench::ExperimentConfig c = bench::parse_config(doc);
  const bench::Problem p = bench::generate_problem(c, 3);
  const bench::RunOutput run = bench::run_restoration(p, c, "gibbsddrm");
  CHECK_FALSE(run.ok);
  const json j = bench::result_to_json(run, c);
  CHECK(j["status"] == "failed");
  CHECK(j["failure"]["t"].get<int>() < 10);
  CHECK(j["failure"]["cycle"] == 1);
  CHECK(j["metrics"].is_null());
}

TEST_CASE("evaluations to threshold") {
  const std::vector<bench::KernelErrorPoint> trace{{0, 1.0}, {5, 0.8}, {9, 0.4}, {12, 0.3}};
  CHECK(bench::evaluations_to_threshold(trace, 0.5) == 9);
  CHECK(bench::evaluations_to_threshold(trace, 1.0) == 0);
  CHECK(bench::evaluations_to_threshold(trace, 0.1) == -1);
}

TEST_CASE("seeds run in parallel keep their order") {
  const std::vector<std::uint64_t> seeds{5, 1, 4, 2, 3};
  const auto out = bench::for_each_seed(seeds, 3, [](std::uint64_t s) { return s * 10; });
  CHECK(out == std::vector<std::uint64_t>{50, 10, 40, 20, 30});
}
